// End-to-end tests for the command-line tool. Each case shells out to the
// installed binary (path in the CTAS_BIN environment variable), captures
// stdout/stderr, and inspects exit codes and on-disk outputs.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string bin() {
  const char* b = std::getenv("CTAS_BIN");
  REQUIRE_MESSAGE(b != nullptr, "CTAS_BIN must point at the cli binary");
  return b;
}

struct RunResult {
  int exit_code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path scratch_root() {
  static fs::path root = [] {
    fs::path p = fs::temp_directory_path() /
                 ("ctas_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

fs::path scratch(const std::string& name) {
  fs::path p = scratch_root() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunResult run(const std::string& args) {
  static int counter = 0;
  fs::path out_file = scratch_root() / ("stdout_" + std::to_string(counter) + ".txt");
  fs::path err_file = scratch_root() / ("stderr_" + std::to_string(counter) + ".txt");
  ++counter;
  std::string cmd =
      bin() + " " + args + " >" + out_file.string() + " 2>" + err_file.string();
  int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

json parse_stdout(const RunResult& r) {
  CAPTURE(r.out);
  return json::parse(r.out);
}

json read_manifest(const fs::path& dir) { return json::parse(slurp(dir / "manifest.json")); }

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("gen writes a reproducible scene bundle") {
  fs::path a = scratch("gen_a"), b = scratch("gen_b");
  std::string flags =
      "gen --width 48 --height 32 --layout gradient --sparse-rate 3 "
      "--dense-rate 9 --seed 11 --raster-sigma 3 --out ";
  RunResult ra = run(flags + a.string());
  RunResult rb = run(flags + b.string());
  REQUIRE(ra.exit_code == 0);
  REQUIRE(rb.exit_code == 0);
  for (const char* name : {"annotations.json", "density.csv", "density.dgrd"}) {
    CAPTURE(name);
    CHECK(slurp(a / name) == slurp(b / name));
    CHECK(!slurp(a / name).empty());
  }
  json manifest = read_manifest(a);
  CHECK(manifest.at("command") == "gen");
  CHECK(manifest.at("config").at("width") == 48);
  CHECK(manifest.at("config").at("layout") == "gradient");
  CHECK(manifest.at("config").at("seed") == 11);
  CHECK(manifest.at("results").at("n_points").get<int>() >= 0);
  // stdout carries the same manifest object
  CHECK(parse_stdout(ra) == manifest);
}

TEST_CASE("gen validates layout and rates") {
  fs::path d = scratch("gen_bad");
  CHECK(run("gen --layout diagonal --out " + d.string()).exit_code == 2);
  CHECK(run("gen --sparse-rate -1 --out " + d.string()).exit_code == 2);
  CHECK(run("gen --width 0 --out " + d.string()).exit_code == 2);
}

TEST_CASE("missing --out is a usage error") {
  CHECK(run("gen --width 16 --height 16").exit_code == 2);
}

TEST_CASE("loss of a matching prediction is numerically zero") {
  fs::path g = scratch("loss_gen");
  REQUIRE(run("gen --width 16 --height 16 --layout uniform --sparse-rate 40 "
              "--dense-rate 40 --seed 3 --out " +
              g.string())
              .exit_code == 0);
  int n_points = read_manifest(g).at("results").at("n_points").get<int>();
  REQUIRE(n_points > 0);

  for (const char* pred : {"density.csv", "density.dgrd"}) {
    CAPTURE(pred);
    fs::path o = scratch(std::string("loss_out_") + pred);
    RunResult r = run("loss --gt " + (g / "annotations.json").string() + " --pred " +
                      (g / pred).string() + " --cost l2 --out " + o.string());
    REQUIRE(r.exit_code == 0);
    json lb = parse_stdout(r);
    CHECK(lb.at("total").get<double>() <= 1e-6);
    CHECK(lb.at("counting").get<double>() <= 1e-9);
    CHECK(lb.at("tv").get<double>() <= 1e-9);
    CHECK(lb.at("gt_mass").get<double>() == doctest::Approx(n_points).epsilon(1e-9));
    // manifest mirrors the breakdown
    CHECK(read_manifest(o).at("results") == lb);
  }
}

TEST_CASE("loss requires a bandwidth for the correntropy cost") {
  fs::path g = scratch("loss_sigma_gen"), o = scratch("loss_sigma_out");
  REQUIRE(run("gen --width 16 --height 16 --layout uniform --sparse-rate 40 "
              "--dense-rate 40 --seed 3 --out " +
              g.string())
              .exit_code == 0);
  RunResult r = run("loss --gt " + (g / "annotations.json").string() + " --pred " +
                    (g / "density.csv").string() + " --cost correntropy --out " + o.string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("--sigma") != std::string::npos);
}

TEST_CASE("loss refuses a massless prediction") {
  fs::path g = scratch("loss_zero_gen"), o = scratch("loss_zero_out");
  REQUIRE(run("gen --width 16 --height 16 --layout uniform --sparse-rate 40 "
              "--dense-rate 40 --seed 3 --out " +
              g.string())
              .exit_code == 0);
  std::ofstream(g / "zero.csv") << "0,0\n0,0\n";
  RunResult r = run("loss --gt " + (g / "annotations.json").string() + " --pred " +
                    (g / "zero.csv").string() + " --cost l2 --out " + o.string());
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("mass") != std::string::npos);
}

TEST_CASE("check suites pass and report their worst residual") {
  struct Suite {
    const char* name;
    const char* n;
    double tol;
  };
  for (Suite s : {Suite{"sinkhorn", "5", 1e-3}, Suite{"grad", "2", 1e-4},
                  Suite{"equivariance", "2", 1e-10}}) {
    CAPTURE(s.name);
    fs::path o = scratch(std::string("check_") + s.name);
    RunResult r = run(std::string("check --suite ") + s.name + " --n " + s.n +
                      " --seed 7 --out " + o.string());
    REQUIRE(r.exit_code == 0);
    json res = parse_stdout(r);
    CHECK(res.at("pass") == true);
    CHECK(res.at("tol").get<double>() == doctest::Approx(s.tol));
    CHECK(res.at("worst").get<double>() <= s.tol);
    CHECK(read_manifest(o).at("results") == res);
  }
}

TEST_CASE("check rejects an unknown suite") {
  fs::path o = scratch("check_bad");
  CHECK(run("check --suite fourier --out " + o.string()).exit_code == 2);
}

TEST_CASE("train rejects non-positive step counts") {
  fs::path o = scratch("train_zero");
  RunResult r = run("train --steps 0 --out " + o.string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("steps") != std::string::npos);
}

TEST_CASE("train then eval reproduces the training metrics bit for bit") {
  fs::path t = scratch("train_run"), e = scratch("eval_run");
  RunResult rt = run("train --scenes 2 --width 64 --height 64 --steps 2 --lr 1e-4 --out " +
                     t.string());
  REQUIRE_MESSAGE(rt.exit_code == 0, rt.err);

  json tm = read_manifest(t);
  double train_mae = tm.at("results").at("mae").get<double>();
  double train_mse = tm.at("results").at("mse").get<double>();
  CHECK(std::isfinite(train_mae));
  CHECK(train_mae <= train_mse);

  std::vector<std::string> trace = read_lines(t / "trace.csv");
  REQUIRE(trace.size() == 3);  // header + one row per step
  CHECK(trace[0] == "step,counting,ot,tv,total");
  CHECK(fs::exists(t / "checkpoint"));
  CHECK(!fs::is_empty(t / "checkpoint"));

  RunResult re = run("eval --checkpoint " + t.string() + " --out " + e.string());
  REQUIRE_MESSAGE(re.exit_code == 0, re.err);
  json em = read_manifest(e);
  CHECK(em.at("results").at("mae").get<double>() == train_mae);
  CHECK(em.at("results").at("mse").get<double>() == train_mse);

  json images = em.at("results").at("images");
  REQUIRE(images.size() == 2);
  for (const json& img : images) {
    fs::path pgm = e / img.at("path").get<std::string>();
    REQUIRE(fs::exists(pgm));
    std::string head = slurp(pgm).substr(0, 2);
    CHECK(head == "P5");
    CHECK(img.at("scale").get<double>() >= 0.0);
    CHECK(img.at("truth").get<double>() >= 0.0);
  }
}

TEST_CASE("eval rejects a run directory without a manifest") {
  fs::path t = scratch("eval_bad_src"), e = scratch("eval_bad_out");
  CHECK(run("eval --checkpoint " + t.string() + " --out " + e.string()).exit_code == 2);
}

TEST_CASE("ablate covers the requested grid in fusion-major order") {
  fs::path o = scratch("ablate_grid");
  RunResult r = run(
      "ablate --fusion asm,cnn_only --layers 0,4 --sigma inf --scenes 1 "
      "--steps 1 --out " +
      o.string());
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  std::vector<std::string> lines = read_lines(o / "ablation.csv");
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] == "config_id,fusion,n_layers,sigma,mae,mse,steps,seed");
  auto id_of = [](const std::string& line) { return line.substr(0, line.find(',')); };
  CHECK(id_of(lines[1]) == "asm-l0-sinf");
  CHECK(id_of(lines[2]) == "asm-l4-sinf");
  CHECK(id_of(lines[3]) == "cnn_only-l0-sinf");
  CHECK(id_of(lines[4]) == "cnn_only-l4-sinf");
  CHECK(read_manifest(o).at("results").at("rows") == 4);
}

TEST_CASE("ablate validates its axes") {
  fs::path o = scratch("ablate_bad");
  CHECK(run("ablate --layers 3 --out " + o.string()).exit_code == 2);
  CHECK(run("ablate --sigma -2 --out " + o.string()).exit_code == 2);
  CHECK(run("ablate --jobs 0 --out " + o.string()).exit_code == 2);
}

TEST_CASE("config file fills unset flags and loses to explicit ones") {
  fs::path o = scratch("config_merge");
  fs::path cfg = scratch_root() / "merge.json";
  std::ofstream(cfg) << R"({"steps": 7, "lr": 0.5, "layers": "0"})";
  RunResult r = run("ablate --fusion concat --sigma inf --scenes 1 --steps 1 --config " +
                    cfg.string() + " --out " + o.string());
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  json m = read_manifest(o);
  CHECK(m.at("config").at("steps") == 1);   // explicit flag wins
  CHECK(m.at("config").at("lr") == 0.5);    // config fills the gap
  CHECK(m.at("config").at("layers") == json::array({0}));
}

TEST_CASE("a malformed config names the offending line and column") {
  fs::path o = scratch("config_bad");
  fs::path cfg = scratch_root() / "broken.json";
  std::ofstream(cfg) << "{\"steps\": 2,\n \"lr\":: 0.5}";
  RunResult r = run("ablate --config " + cfg.string() + " --out " + o.string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("line 2") != std::string::npos);
  CHECK(r.err.find("column") != std::string::npos);
}
