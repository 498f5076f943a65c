// Command-line front end: scene generation, loss evaluation, property
// checks, toy training, ablation sweeps, and checkpoint evaluation.
//
// Exit codes: 0 success, 2 usage/configuration error, 3 data error,
// 4 property violation, 1 unexpected failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ctas/correntropy.hpp"
#include "ctas/grid.hpp"
#include "ctas/grid_io.hpp"
#include "ctas/loss.hpp"
#include "ctas/model.hpp"
#include "ctas/nets.hpp"
#include "ctas/ot.hpp"
#include "ctas/syntheval.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ctas;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PropertyViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- config & manifest plumbing -------------------------------------------

json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // Map the byte offset to a line/column pair for a usable diagnostic.
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw UsageError(origin + ": parse error at line " + std::to_string(line) + ", column " +
                     std::to_string(column));
  }
}

std::string read_text_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(std::string(what) + " not readable: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json load_config_file(const std::string& path) {
  json j = parse_json_text(read_text_file(path, "config file"), "config " + path);
  if (!j.is_object()) throw UsageError("config " + path + ": top level must be an object");
  return j;
}

// Fills a flag's value from the config object unless the flag was given on
// the command line; flags always win.
template <typename T>
void merge_key(const CLI::App& app, const json& cfg, const std::string& flag, const char* key,
               T& value) {
  if (app.count(flag) > 0) return;
  if (!cfg.contains(key)) return;
  try {
    value = cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("config key '") + key + "' has the wrong type");
  }
}

fs::path prepare_out_dir(const std::string& out) {
  if (out.empty()) throw UsageError("--out must name a directory");
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create --out directory " + out + ": " + ec.message());
  std::ofstream probe(dir / "manifest.json", std::ios::trunc);
  probe << "{}\n";
  if (!probe) throw UsageError("--out directory is not writable: " + out);
  return dir;
}

void write_manifest(const fs::path& dir, const json& manifest) {
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << manifest.dump(2) << "\n";
  if (!out) throw UsageError("failed to write manifest in " + dir.string());
}

json scene_params_json(const SceneParams& p) {
  return json{{"width", p.width},           {"height", p.height},
              {"sparse_rate", p.sparse_rate}, {"dense_rate", p.dense_rate},
              {"layout", layout_name(p.layout)}, {"seed", p.seed}};
}

SceneParams scene_params_from_manifest(const json& j) {
  SceneParams p;
  p.width = j.at("width").get<int>();
  p.height = j.at("height").get<int>();
  p.sparse_rate = j.at("sparse_rate").get<double>();
  p.dense_rate = j.at("dense_rate").get<double>();
  p.layout = layout_from_name(j.at("layout").get<std::string>());
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

double parse_sigma_token(const std::string& token) {
  if (token == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw UsageError("cannot parse bandwidth value '" + token + "'");
  }
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ','))
    if (!item.empty()) parts.push_back(item);
  if (parts.empty()) throw UsageError("list flag needs at least one entry: '" + csv + "'");
  return parts;
}

CostSpec resolve_cost(const std::string& cost_name, bool sigma_given, double sigma) {
  if (cost_name == "l2") return CostSpec::l2();
  if (cost_name == "correntropy") {
    if (!sigma_given) throw UsageError("--cost correntropy requires --sigma");
    return CostSpec::correntropy(sigma);
  }
  throw UsageError("unknown cost '" + cost_name + "' (expected l2 or correntropy)");
}

json breakdown_json(const LossBreakdown& lb) {
  return json{{"counting", lb.counting}, {"ot", lb.ot},           {"tv", lb.tv},
              {"total", lb.total},       {"gt_mass", lb.gt_mass}};
}

// --- gen --------------------------------------------------------------------

struct GenArgs {
  int width = 64, height = 64;
  std::string layout = "halves";
  double sparse_rate = 2.0, dense_rate = 8.0;
  std::uint64_t seed = 0;
  double raster_sigma = 4.0;
  std::string out, config;
};

int cmd_gen(const CLI::App& app, GenArgs a) {
  if (!a.config.empty()) {
    json cfg = load_config_file(a.config);
    merge_key(app, cfg, "--width", "width", a.width);
    merge_key(app, cfg, "--height", "height", a.height);
    merge_key(app, cfg, "--layout", "layout", a.layout);
    merge_key(app, cfg, "--sparse-rate", "sparse_rate", a.sparse_rate);
    merge_key(app, cfg, "--dense-rate", "dense_rate", a.dense_rate);
    merge_key(app, cfg, "--seed", "seed", a.seed);
    merge_key(app, cfg, "--raster-sigma", "raster_sigma", a.raster_sigma);
    merge_key(app, cfg, "--out", "out", a.out);
  }
  fs::path out = prepare_out_dir(a.out);

  SceneParams params;
  params.width = a.width;
  params.height = a.height;
  params.layout = layout_from_name(a.layout);
  params.sparse_rate = a.sparse_rate;
  params.dense_rate = a.dense_rate;
  params.seed = a.seed;
  validate_scene_params(params);
  if (!(a.raster_sigma > 0.0) || !std::isfinite(a.raster_sigma))
    throw UsageError("--raster-sigma must be positive and finite");

  SyntheticScene scene = gen_scene(params);
  DensityGrid density = gaussian_rasterize(scene.annotations, a.raster_sigma);

  write_annotations(scene.annotations, (out / "annotations.json").string());
  write_grid_csv(density, (out / "density.csv").string());
  write_grid_binary(density, (out / "density.dgrd").string());

  json manifest{
      {"command", "gen"},
      {"config",
       {{"width", params.width},
        {"height", params.height},
        {"layout", layout_name(params.layout)},
        {"sparse_rate", params.sparse_rate},
        {"dense_rate", params.dense_rate},
        {"seed", params.seed},
        {"raster_sigma", a.raster_sigma}}},
      {"results", {{"n_points", scene.annotations.points.size()},
                   {"density_mass", grid_sum(density)}}},
      {"outputs", {"annotations.json", "density.csv", "density.dgrd"}}};
  write_manifest(out, manifest);
  std::cout << manifest.dump(2) << "\n";
  return 0;
}

// --- loss -------------------------------------------------------------------

struct LossArgs {
  std::string gt, pred;
  std::string cost = "l2";
  double sigma = 0.0;
  double raster_sigma = 4.0;
  std::string out, config;
};

int cmd_loss(const CLI::App& app, LossArgs a) {
  bool sigma_given = app.count("--sigma") > 0;
  if (!a.config.empty()) {
    json cfg = load_config_file(a.config);
    merge_key(app, cfg, "--gt", "gt", a.gt);
    merge_key(app, cfg, "--pred", "pred", a.pred);
    merge_key(app, cfg, "--cost", "cost", a.cost);
    merge_key(app, cfg, "--raster-sigma", "raster_sigma", a.raster_sigma);
    merge_key(app, cfg, "--out", "out", a.out);
    if (!sigma_given && cfg.contains("sigma")) {
      merge_key(app, cfg, "--sigma", "sigma", a.sigma);
      sigma_given = true;
    }
  }
  fs::path out = prepare_out_dir(a.out);
  CostSpec cost = resolve_cost(a.cost, sigma_given, a.sigma);
  if (!(a.raster_sigma > 0.0) || !std::isfinite(a.raster_sigma))
    throw UsageError("--raster-sigma must be positive and finite");

  PointAnnotations ann;
  try {
    ann = read_annotations(a.gt);
  } catch (const std::exception& e) {
    throw DataError("ground truth " + a.gt + ": " + e.what());
  }
  DensityGrid pred;
  try {
    pred = read_grid_auto(a.pred);
  } catch (const std::exception& e) {
    throw DataError("prediction " + a.pred + ": " + e.what());
  }
  if (grid_sum(pred) <= 0.0)
    throw DataError("prediction carries no mass; the transport loss is undefined");
  if (ann.points.empty()) throw DataError("ground truth has no points");

  // Rasterize the annotations in the prediction frame so both densities live
  // on the same grid.
  double sx = static_cast<double>(pred.width) / ann.width;
  double sy = static_cast<double>(pred.height) / ann.height;
  PointAnnotations scaled;
  scaled.width = pred.width;
  scaled.height = pred.height;
  for (const Point& p : ann.points) scaled.points.push_back({p.x * sx, p.y * sy});
  DensityGrid z = gaussian_rasterize(scaled, a.raster_sigma);

  LossBreakdown lb = combined_loss(z, pred, cost, SolverConfig::accurate());
  json result = breakdown_json(lb);

  json manifest{{"command", "loss"},
                {"config",
                 {{"gt", a.gt},
                  {"pred", a.pred},
                  {"cost", a.cost},
                  {"sigma", cost.kind == CostKind::correntropy ? json(cost.sigma) : json()},
                  {"raster_sigma", a.raster_sigma}}},
                {"results", result}};
  write_manifest(out, manifest);
  std::cout << result.dump(2) << "\n";
  return 0;
}

// --- check ------------------------------------------------------------------

struct CheckArgs {
  std::string suite;
  int n = 0;
  std::uint64_t seed = 0;
  std::string instance;
  std::string out, config;
};

double check_sinkhorn(int n_instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(2, 8);
  std::uniform_real_distribution<double> coord(0.0, 10.0), mass(0.05, 1.0);
  double worst = 0.0;
  for (int t = 0; t < n_instances; ++t) {
    int n = size(rng), m = size(rng);
    std::vector<Point> src, dst;
    for (int i = 0; i < n; ++i) src.push_back({coord(rng), coord(rng)});
    for (int j = 0; j < m; ++j) dst.push_back({coord(rng), coord(rng)});
    auto simplex = [&](int k) {
      std::vector<double> v(k);
      double s = 0.0;
      for (double& x : v) s += (x = mass(rng));
      for (double& x : v) x /= s;
      return v;
    };
    std::vector<double> mu = simplex(n), nu = simplex(m);
    CostMatrix c = build_cost(src, dst, CostSpec::l2());
    TransportPlan entropic = sinkhorn_annealed(c, mu, nu, SolverConfig::accurate());
    TransportPlan exact = exact_ot(c, mu, nu);
    double rel = std::abs(entropic.attained_cost - exact.attained_cost) /
                 std::max(exact.attained_cost, 1e-12);
    worst = std::max(worst, rel);
  }
  return worst;
}

double check_grad(int n_instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> massd(0.2, 1.2);
  double worst = 0.0;
  const double h = 1e-6;
  for (int t = 0; t < n_instances; ++t) {
    DensityGrid z = DensityGrid::zeros(4, 4), zhat = DensityGrid::zeros(4, 4);
    for (double& v : z.values) v = massd(rng);
    for (double& v : zhat.values) v = massd(rng);
    // Keep the counting term away from its kink so central differences see a
    // locally smooth objective.
    double gap = grid_sum(zhat) - grid_sum(z);
    if (std::abs(gap) < 0.05) {
      for (double& v : zhat.values) v *= 1.05;
    }
    for (CostSpec cost : {CostSpec::l2(), CostSpec::correntropy(16.0)}) {
      LossBreakdown lb = combined_loss(z, zhat, cost, SolverConfig::accurate());
      for (std::size_t i = 0; i < zhat.size(); i += 3) {
        DensityGrid up = zhat, dn = zhat;
        up.values[i] += h;
        dn.values[i] -= h;
        double fd = (combined_loss(z, up, cost, SolverConfig::accurate()).total -
                     combined_loss(z, dn, cost, SolverConfig::accurate()).total) /
                    (2.0 * h);
        worst = std::max(worst, std::abs(lb.grad_wrt_prediction.values[i] - fd));
      }
    }
  }
  return worst;
}

double check_equivariance(int n_instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(-0.3, 0.3), val(-1.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < n_instances; ++t) {
    int n = 16, d = 32;
    std::vector<EncoderLayerParams> layers;
    for (int l = 0; l < 4; ++l) {
      EncoderLayerParams p = make_encoder_layer(d, 4);
      for (double& v : p.w_q) v += noise(rng);
      for (double& v : p.w_k) v += noise(rng);
      for (double& v : p.w_v) v += noise(rng);
      for (double& v : p.ffn1.weight) v += noise(rng);
      for (double& v : p.ffn2.weight) v += noise(rng);
      layers.push_back(std::move(p));
    }
    TokenSequence z = TokenSequence::zeros(n, d);
    for (double& v : z.values) v = val(rng);
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    TokenSequence pz = TokenSequence::zeros(n, d);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < d; ++k) pz.at(i, k) = z.at(perm[i], k);
    auto run = [&](TokenSequence tok) {
      for (const EncoderLayerParams& l : layers) tok = encoder_layer(tok, l);
      return tok;
    };
    TokenSequence a = run(z), b = run(pz);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < d; ++k)
        worst = std::max(worst, std::abs(b.at(i, k) - a.at(perm[i], k)));
  }
  return worst;
}

int cmd_check(const CLI::App& app, CheckArgs a) {
  if (!a.config.empty()) {
    json cfg = load_config_file(a.config);
    merge_key(app, cfg, "--suite", "suite", a.suite);
    merge_key(app, cfg, "--n", "n", a.n);
    merge_key(app, cfg, "--seed", "seed", a.seed);
    merge_key(app, cfg, "--out", "out", a.out);
  }
  fs::path out = prepare_out_dir(a.out);

  double worst = 0.0, tol = 0.0;
  int n = a.n;
  if (a.suite == "sinkhorn") {
    if (n <= 0) n = 100;
    tol = 1e-3;
    worst = check_sinkhorn(n, a.seed);
  } else if (a.suite == "grad") {
    if (n <= 0) n = 20;
    tol = 1e-4;
    worst = check_grad(n, a.seed);
  } else if (a.suite == "equivariance") {
    if (n <= 0) n = 10;
    tol = 1e-10;
    worst = check_equivariance(n, a.seed);
  } else {
    throw UsageError("unknown suite '" + a.suite +
                     "' (expected sinkhorn, grad, or equivariance)");
  }

  bool pass = worst <= tol;
  json result{{"suite", a.suite}, {"n", n},     {"seed", a.seed},
              {"worst", worst},   {"tol", tol}, {"pass", pass}};
  json manifest{{"command", "check"},
                {"config", {{"suite", a.suite}, {"n", n}, {"seed", a.seed}}},
                {"results", result}};
  write_manifest(out, manifest);
  std::cout << result.dump(2) << "\n";
  if (!pass)
    throw PropertyViolation("suite " + a.suite + " worst residual " + format_double(worst) +
                            " exceeds " + format_double(tol));
  return 0;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  int scenes = 8;
  int width = 64, height = 64;
  std::string layout = "halves";
  double sparse_rate = 2.0, dense_rate = 8.0;
  std::uint64_t scene_seed = 0;
  int steps = 500;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::string cost = "correntropy";
  double sigma = 4.0;
  std::string fusion = "asm";
  int layers = 4;
  std::string out, config;
};

int cmd_train(const CLI::App& app, TrainArgs a) {
  if (!a.config.empty()) {
    json cfg = load_config_file(a.config);
    merge_key(app, cfg, "--scenes", "scenes", a.scenes);
    merge_key(app, cfg, "--width", "width", a.width);
    merge_key(app, cfg, "--height", "height", a.height);
    merge_key(app, cfg, "--layout", "layout", a.layout);
    merge_key(app, cfg, "--sparse-rate", "sparse_rate", a.sparse_rate);
    merge_key(app, cfg, "--dense-rate", "dense_rate", a.dense_rate);
    merge_key(app, cfg, "--scene-seed", "scene_seed", a.scene_seed);
    merge_key(app, cfg, "--steps", "steps", a.steps);
    merge_key(app, cfg, "--lr", "lr", a.lr);
    merge_key(app, cfg, "--seed", "seed", a.seed);
    merge_key(app, cfg, "--cost", "cost", a.cost);
    merge_key(app, cfg, "--sigma", "sigma", a.sigma);
    merge_key(app, cfg, "--fusion", "fusion", a.fusion);
    merge_key(app, cfg, "--layers", "layers", a.layers);
    merge_key(app, cfg, "--out", "out", a.out);
  }
  fs::path out = prepare_out_dir(a.out);
  if (a.steps < 1) throw UsageError("--steps must be at least 1");
  if (a.scenes < 1) throw UsageError("--scenes must be at least 1");
  CostSpec cost = resolve_cost(a.cost, true, a.sigma);

  SceneParams sp;
  sp.width = a.width;
  sp.height = a.height;
  sp.layout = layout_from_name(a.layout);
  sp.sparse_rate = a.sparse_rate;
  sp.dense_rate = a.dense_rate;
  sp.seed = a.scene_seed;
  validate_scene_params(sp);

  NetConfig net;
  net.fusion = fusion_mode_from_name(a.fusion);
  net.n_layers = a.layers;
  validate_net_config(net);

  std::vector<SyntheticScene> scenes = make_benchmark_scenes(sp, a.scenes);
  TrainResult result = train_toy(scenes, net, cost, a.steps, a.lr, a.seed);

  write_trace_csv(result.trace, (out / "trace.csv").string());
  save_checkpoint(result.model, (out / "checkpoint").string());

  json manifest{
      {"command", "train"},
      {"config",
       {{"scene_params", scene_params_json(sp)},
        {"scenes", a.scenes},
        {"steps", a.steps},
        {"lr", a.lr},
        {"seed", a.seed},
        {"cost", a.cost},
        {"sigma", cost.kind == CostKind::correntropy ? json(cost.sigma) : json()},
        {"fusion", fusion_mode_name(net.fusion)},
        {"layers", net.n_layers}}},
      {"results",
       {{"mae", result.report.mae},
        {"mse", result.report.mse},
        {"initial_total", result.trace.front().total},
        {"final_total", result.trace.back().total}}},
      {"outputs", {"trace.csv", "checkpoint"}}};
  write_manifest(out, manifest);
  std::cout << manifest.dump(2) << "\n";
  return 0;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string out, config;
};

int cmd_eval(const CLI::App& app, EvalArgs a) {
  if (!a.config.empty()) {
    json cfg = load_config_file(a.config);
    merge_key(app, cfg, "--checkpoint", "checkpoint", a.checkpoint);
    merge_key(app, cfg, "--out", "out", a.out);
  }
  fs::path out = prepare_out_dir(a.out);

  fs::path run_dir(a.checkpoint);
  json train_manifest = parse_json_text(
      read_text_file((run_dir / "manifest.json").string(), "run manifest"),
      "manifest " + (run_dir / "manifest.json").string());
  if (!train_manifest.contains("config") ||
      !train_manifest.at("config").contains("scene_params"))
    throw UsageError("run manifest lacks the scene parameters needed for evaluation");

  SceneParams sp;
  int n_scenes = 0;
  try {
    sp = scene_params_from_manifest(train_manifest.at("config").at("scene_params"));
    n_scenes = train_manifest.at("config").at("scenes").get<int>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("run manifest is malformed: ") + e.what());
  }

  CtasModel model;
  try {
    model = load_checkpoint((run_dir / "checkpoint").string());
  } catch (const std::exception& e) {
    throw DataError("checkpoint " + (run_dir / "checkpoint").string() + ": " + e.what());
  }

  std::vector<SyntheticScene> scenes = make_benchmark_scenes(sp, n_scenes);
  EvalReport report = evaluate(model, scenes);

  json images = json::array();
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    ModelForward fwd = model_forward(model, scene_to_image(scenes[i]));
    std::string name = "pred_" + std::to_string(i) + ".pgm";
    double scale = write_grid_pgm(fwd.prediction, (out / name).string());
    images.push_back(json{{"path", name},
                          {"scale", scale},
                          {"truth", report.per_image[i].truth},
                          {"estimate", report.per_image[i].estimate}});
  }

  json manifest{{"command", "eval"},
                {"config",
                 {{"checkpoint", a.checkpoint},
                  {"scene_params", scene_params_json(sp)},
                  {"scenes", n_scenes}}},
                {"results", {{"mae", report.mae}, {"mse", report.mse}, {"images", images}}}};
  write_manifest(out, manifest);
  std::cout << manifest.dump(2) << "\n";
  return 0;
}

// --- ablate -----------------------------------------------------------------

struct AblateArgs {
  std::string fusion = "cnn_only,transformer_only,concat,asm";
  std::string layers = "0,2,4,6,8";
  std::string sigma = "4,8,16,32,inf";
  int scenes = 2;
  int width = 64, height = 64;
  std::string layout = "halves";
  double sparse_rate = 2.0, dense_rate = 8.0;
  std::uint64_t scene_seed = 0;
  int steps = 5;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out, config;
};

int cmd_ablate(const CLI::App& app, AblateArgs a) {
  if (!a.config.empty()) {
    json cfg = load_config_file(a.config);
    merge_key(app, cfg, "--fusion", "fusion", a.fusion);
    merge_key(app, cfg, "--layers", "layers", a.layers);
    merge_key(app, cfg, "--sigma", "sigma", a.sigma);
    merge_key(app, cfg, "--scenes", "scenes", a.scenes);
    merge_key(app, cfg, "--width", "width", a.width);
    merge_key(app, cfg, "--height", "height", a.height);
    merge_key(app, cfg, "--layout", "layout", a.layout);
    merge_key(app, cfg, "--sparse-rate", "sparse_rate", a.sparse_rate);
    merge_key(app, cfg, "--dense-rate", "dense_rate", a.dense_rate);
    merge_key(app, cfg, "--scene-seed", "scene_seed", a.scene_seed);
    merge_key(app, cfg, "--steps", "steps", a.steps);
    merge_key(app, cfg, "--lr", "lr", a.lr);
    merge_key(app, cfg, "--seed", "seed", a.seed);
    merge_key(app, cfg, "--jobs", "jobs", a.jobs);
    merge_key(app, cfg, "--out", "out", a.out);
  }
  fs::path out = prepare_out_dir(a.out);

  AblationSpec spec;
  spec.fusions.clear();
  for (const std::string& name : split_list(a.fusion))
    spec.fusions.push_back(fusion_mode_from_name(name));
  spec.layer_counts.clear();
  for (const std::string& tok : split_list(a.layers)) {
    try {
      spec.layer_counts.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw UsageError("cannot parse layer count '" + tok + "'");
    }
  }
  spec.sigmas.clear();
  for (const std::string& tok : split_list(a.sigma))
    spec.sigmas.push_back(parse_sigma_token(tok));

  spec.scene_params.width = a.width;
  spec.scene_params.height = a.height;
  spec.scene_params.layout = layout_from_name(a.layout);
  spec.scene_params.sparse_rate = a.sparse_rate;
  spec.scene_params.dense_rate = a.dense_rate;
  spec.scene_params.seed = a.scene_seed;
  spec.n_scenes = a.scenes;
  spec.steps = a.steps;
  spec.lr = a.lr;
  spec.seed = a.seed;
  spec.jobs = a.jobs;

  std::vector<AblationRow> rows = ablate(spec);
  write_ablation_csv(rows, (out / "ablation.csv").string());

  json sigma_list = json::array();
  for (double s : spec.sigmas) sigma_list.push_back(sigma_label(s));
  json fusion_list = json::array();
  for (FusionMode m : spec.fusions) fusion_list.push_back(fusion_mode_name(m));
  json manifest{{"command", "ablate"},
                {"config",
                 {{"fusions", fusion_list},
                  {"layers", spec.layer_counts},
                  {"sigmas", sigma_list},
                  {"scene_params", scene_params_json(spec.scene_params)},
                  {"scenes", spec.n_scenes},
                  {"steps", spec.steps},
                  {"lr", spec.lr},
                  {"seed", spec.seed},
                  {"jobs", spec.jobs}}},
                {"results", {{"rows", rows.size()}}},
                {"outputs", {"ablation.csv"}}};
  write_manifest(out, manifest);
  std::cout << manifest.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowd-density toolkit: transport losses, toy training, ablations"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a synthetic scene");
  gen_cmd->add_option("--width", gen.width, "frame width in pixels");
  gen_cmd->add_option("--height", gen.height, "frame height in pixels");
  gen_cmd->add_option("--layout", gen.layout, "halves | gradient | uniform");
  gen_cmd->add_option("--sparse-rate", gen.sparse_rate, "people per kilo-pixel (sparse side)");
  gen_cmd->add_option("--dense-rate", gen.dense_rate, "people per kilo-pixel (dense side)");
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--raster-sigma", gen.raster_sigma, "bump width for density.csv");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--config", gen.config, "JSON config; flags win");

  LossArgs loss;
  CLI::App* loss_cmd = app.add_subcommand("loss", "Composite loss of a prediction");
  loss_cmd->add_option("--gt", loss.gt, "annotation JSON")->required();
  loss_cmd->add_option("--pred", loss.pred, "predicted grid (.csv or .dgrd)")->required();
  loss_cmd->add_option("--cost", loss.cost, "l2 | correntropy");
  loss_cmd->add_option("--sigma", loss.sigma, "correntropy bandwidth");
  loss_cmd->add_option("--raster-sigma", loss.raster_sigma, "ground-truth bump width");
  loss_cmd->add_option("--out", loss.out, "output directory")->required();
  loss_cmd->add_option("--config", loss.config, "JSON config; flags win");

  CheckArgs check;
  CLI::App* check_cmd = app.add_subcommand("check", "Numerical property checks");
  check_cmd->add_option("--suite", check.suite, "sinkhorn | grad | equivariance")->required();
  check_cmd->add_option("--n", check.n, "instance count (suite default if omitted)");
  check_cmd->add_option("--seed", check.seed, "instance seed");
  check_cmd->add_option("--out", check.out, "output directory")->required();
  check_cmd->add_option("--config", check.config, "JSON config; flags win");

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train the toy model");
  train_cmd->add_option("--scenes", train.scenes, "number of training scenes");
  train_cmd->add_option("--width", train.width, "scene width");
  train_cmd->add_option("--height", train.height, "scene height");
  train_cmd->add_option("--layout", train.layout, "halves | gradient | uniform");
  train_cmd->add_option("--sparse-rate", train.sparse_rate, "sparse-side rate");
  train_cmd->add_option("--dense-rate", train.dense_rate, "dense-side rate");
  train_cmd->add_option("--scene-seed", train.scene_seed, "scene base seed");
  train_cmd->add_option("--steps", train.steps, "descent steps");
  train_cmd->add_option("--lr", train.lr, "learning rate");
  train_cmd->add_option("--seed", train.seed, "model/training seed");
  train_cmd->add_option("--cost", train.cost, "l2 | correntropy");
  train_cmd->add_option("--sigma", train.sigma, "correntropy bandwidth");
  train_cmd->add_option("--fusion", train.fusion, "cnn_only | transformer_only | concat | asm");
  train_cmd->add_option("--layers", train.layers, "encoder depth {0,2,4,6,8}");
  train_cmd->add_option("--out", train.out, "output directory")->required();
  train_cmd->add_option("--config", train.config, "JSON config; flags win");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a training run");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "train output directory")->required();
  eval_cmd->add_option("--out", eval.out, "output directory")->required();
  eval_cmd->add_option("--config", eval.config, "JSON config; flags win");

  AblateArgs ablate_args;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "Fusion/depth/bandwidth sweep");
  ablate_cmd->add_option("--fusion", ablate_args.fusion, "comma list of fusion modes");
  ablate_cmd->add_option("--layers", ablate_args.layers, "comma list of encoder depths");
  ablate_cmd->add_option("--sigma", ablate_args.sigma, "comma list of bandwidths (inf = l2)");
  ablate_cmd->add_option("--scenes", ablate_args.scenes, "scenes per configuration");
  ablate_cmd->add_option("--width", ablate_args.width, "scene width");
  ablate_cmd->add_option("--height", ablate_args.height, "scene height");
  ablate_cmd->add_option("--layout", ablate_args.layout, "halves | gradient | uniform");
  ablate_cmd->add_option("--sparse-rate", ablate_args.sparse_rate, "sparse-side rate");
  ablate_cmd->add_option("--dense-rate", ablate_args.dense_rate, "dense-side rate");
  ablate_cmd->add_option("--scene-seed", ablate_args.scene_seed, "scene base seed");
  ablate_cmd->add_option("--steps", ablate_args.steps, "descent steps per configuration");
  ablate_cmd->add_option("--lr", ablate_args.lr, "learning rate");
  ablate_cmd->add_option("--seed", ablate_args.seed, "training seed");
  ablate_cmd->add_option("--jobs", ablate_args.jobs, "parallel workers");
  ablate_cmd->add_option("--out", ablate_args.out, "output directory")->required();
  ablate_cmd->add_option("--config", ablate_args.config, "JSON config; flags win");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(*gen_cmd, gen);
    if (loss_cmd->parsed()) return cmd_loss(*loss_cmd, loss);
    if (check_cmd->parsed()) return cmd_check(*check_cmd, check);
    if (train_cmd->parsed()) return cmd_train(*train_cmd, train);
    if (eval_cmd->parsed()) return cmd_eval(*eval_cmd, eval);
    if (ablate_cmd->parsed()) return cmd_ablate(*ablate_cmd, ablate_args);
    std::cerr << "no subcommand selected\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const PropertyViolation& e) {
    std::cerr << "property violation: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected failure: " << e.what() << "\n";
    return 1;
  }
}
