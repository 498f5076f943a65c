#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "ctas/grid.hpp"
#include "ctas/grid_io.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace ctas;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* stem) {
  static int counter = 0;
  return fs::temp_directory_path() / (std::string("ctas_grid_") + stem + "_" +
                                      std::to_string(counter++) + ".tmp");
}

DensityGrid iota_grid(int w, int h, double start = 1.0) {
  DensityGrid g = DensityGrid::zeros(w, h);
  for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = start + static_cast<double>(i);
  return g;
}

}  // namespace

TEST_CASE("grid summary statistics") {
  DensityGrid g = iota_grid(4, 4);  // 1..16
  CHECK(grid_sum(g) == doctest::Approx(136.0));
  CHECK(grid_mean(g) == doctest::Approx(8.5));
  CHECK(grid_min(g) == doctest::Approx(1.0));
  CHECK(grid_max(g) == doctest::Approx(16.0));
}

TEST_CASE("grid validation rejects malformed fields") {
  CHECK_THROWS_AS(validate_grid(DensityGrid{0, 4, {}}), std::invalid_argument);
  DensityGrid short_values{2, 2, {1.0, 2.0, 3.0}};
  CHECK_THROWS_AS(validate_grid(short_values), std::invalid_argument);
  DensityGrid nan_grid = DensityGrid::zeros(2, 2);
  nan_grid.values[1] = std::nan("");
  CHECK_THROWS_AS(validate_grid(nan_grid), std::invalid_argument);
}

TEST_CASE("block pooling averages even partitions") {
  DensityGrid g = iota_grid(4, 4);  // 1..16 row-major
  BlockGrid b = block_average_pool(g, 2);
  CHECK(b.at(0, 0) == doctest::Approx(3.5));
  CHECK(b.at(1, 0) == doctest::Approx(5.5));
  CHECK(b.at(0, 1) == doctest::Approx(11.5));
  CHECK(b.at(1, 1) == doctest::Approx(13.5));
}

TEST_CASE("block pooling splits ragged partitions by at most one") {
  DensityGrid g = iota_grid(5, 5);
  BlockGrid b = block_average_pool(g, 2);
  // 5 = 2 + 3 split; the first block along each axis takes floor(5/2) = 2.
  CHECK(b.k == 2);
  double manual = (1 + 2 + 6 + 7) / 4.0;
  CHECK(b.at(0, 0) == doctest::Approx(manual));
}

TEST_CASE("block pool adjoint satisfies the inner-product identity") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    int w = 3 + static_cast<int>(rng() % 6), h = 3 + static_cast<int>(rng() % 6);
    int k = 1 + static_cast<int>(rng() % 3);
    DensityGrid x = ctas::testing::random_grid(rng, w, h);
    BlockGrid y;
    y.k = k;
    y.block_values.resize(static_cast<std::size_t>(k) * k);
    for (double& v : y.block_values) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    BlockGrid px = block_average_pool(x, k);
    DensityGrid ay = block_pool_adjoint(y, w, h);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < px.block_values.size(); ++i)
      lhs += px.block_values[i] * y.block_values[i];
    for (std::size_t i = 0; i < x.values.size(); ++i) rhs += x.values[i] * ay.values[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("bilinear upsampling of a two-pixel row") {
  DensityGrid src = DensityGrid::zeros(2, 1);
  src.values = {0.0, 1.0};
  DensityGrid up = bilinear_upsample(src, 4, 1);
  CHECK(up.values[0] == doctest::Approx(0.0));
  CHECK(up.values[1] == doctest::Approx(0.25));
  CHECK(up.values[2] == doctest::Approx(0.75));
  CHECK(up.values[3] == doctest::Approx(1.0));
}

TEST_CASE("bilinear upsampling preserves constants and range") {
  std::mt19937_64 rng(17);
  DensityGrid flat = DensityGrid::constant(3, 5, 2.75);
  DensityGrid up = bilinear_upsample(flat, 9, 10);
  for (double v : up.values) CHECK(v == doctest::Approx(2.75));

  DensityGrid noisy = ctas::testing::random_grid(rng, 6, 4);
  DensityGrid up2 = bilinear_upsample(noisy, 13, 11);
  for (double v : up2.values) {
    CHECK(v >= grid_min(noisy) - 1e-12);
    CHECK(v <= grid_max(noisy) + 1e-12);
  }
}

TEST_CASE("bilinear upsample adjoint satisfies the inner-product identity") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    int iw = 2 + static_cast<int>(rng() % 5), ih = 2 + static_cast<int>(rng() % 5);
    int ow = iw + static_cast<int>(rng() % 9), oh = ih + static_cast<int>(rng() % 9);
    DensityGrid x = ctas::testing::random_grid(rng, iw, ih, -1.0, 1.0);
    DensityGrid y = ctas::testing::random_grid(rng, ow, oh, -1.0, 1.0);
    DensityGrid ux = bilinear_upsample(x, ow, oh);
    DensityGrid ay = bilinear_upsample_adjoint(y, iw, ih);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < ux.values.size(); ++i) lhs += ux.values[i] * y.values[i];
    for (std::size_t i = 0; i < x.values.size(); ++i) rhs += x.values[i] * ay.values[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("gaussian rasterization drops unit mass per point") {
  PointAnnotations ann{32, 32, {{5.0, 5.0}, {20.25, 11.5}, {31.5, 31.5}}};
  DensityGrid g = gaussian_rasterize(ann, 2.0);
  CHECK(grid_sum(g) == doctest::Approx(3.0).epsilon(1e-9));

  // Edge point: the in-frame window renormalizes, so mass is still one.
  PointAnnotations corner{16, 16, {{0.2, 0.1}}};
  CHECK(grid_sum(gaussian_rasterize(corner, 3.0)) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("dot map bins scaled points with unit mass") {
  PointAnnotations ann{64, 64, {{1.0, 1.0}, {63.0, 63.0}, {32.5, 16.25}}};
  DensityGrid d = dot_map(ann, 32, 32);
  CHECK(grid_sum(d) == doctest::Approx(3.0));
  CHECK(d.at(0, 0) == doctest::Approx(1.0));   // (1,1) -> pixel (0,0) at half scale
  CHECK(d.at(31, 31) == doctest::Approx(1.0));
  CHECK(d.at(16, 8) == doctest::Approx(1.0));
}

TEST_CASE("annotation validation enforces the frame") {
  CHECK_NOTHROW(validate_annotations({8, 8, {{0.0, 0.0}, {7.999, 7.999}}}));
  CHECK_THROWS_AS(validate_annotations({8, 8, {{8.0, 3.0}}}), std::invalid_argument);
  CHECK_THROWS_AS(validate_annotations({8, 8, {{-0.1, 3.0}}}), std::invalid_argument);
  CHECK_THROWS_AS(validate_annotations({0, 8, {}}), std::invalid_argument);
}

TEST_CASE("csv grid io round-trips exactly") {
  std::mt19937_64 rng(31);
  DensityGrid g = ctas::testing::random_grid(rng, 7, 5, 0.0, 10.0);
  g.values[3] = 1.0 / 3.0;  // not representable in short decimal
  fs::path p = temp_file("csv");
  write_grid_csv(g, p.string());
  DensityGrid back = read_grid_csv(p.string());
  REQUIRE(back.width == g.width);
  REQUIRE(back.height == g.height);
  for (std::size_t i = 0; i < g.values.size(); ++i) CHECK(back.values[i] == g.values[i]);
  fs::remove(p);
}

TEST_CASE("binary grid io round-trips bit for bit") {
  std::mt19937_64 rng(37);
  DensityGrid g = ctas::testing::random_grid(rng, 9, 4, 0.0, 1e6);
  fs::path p = temp_file("dgrd");
  write_grid_binary(g, p.string());
  DensityGrid back = read_grid_binary(p.string());
  REQUIRE(back.width == g.width);
  REQUIRE(back.height == g.height);
  for (std::size_t i = 0; i < g.values.size(); ++i) CHECK(back.values[i] == g.values[i]);

  std::ifstream in(p, std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  CHECK(std::string(magic, 4) == "DGRD");
  fs::remove(p);
}

TEST_CASE("grid auto-read dispatches on extension") {
  DensityGrid g = iota_grid(3, 3);
  fs::path csv = temp_file("auto_csv");
  fs::path csv_named = csv.parent_path() / (csv.stem().string() + ".csv");
  write_grid_csv(g, csv_named.string());
  CHECK(read_grid_auto(csv_named.string()).values == g.values);
  fs::remove(csv_named);

  fs::path bin = temp_file("auto_bin");
  fs::path bin_named = bin.parent_path() / (bin.stem().string() + ".dgrd");
  write_grid_binary(g, bin_named.string());
  CHECK(read_grid_auto(bin_named.string()).values == g.values);
  fs::remove(bin_named);
}

TEST_CASE("annotation json round-trips") {
  PointAnnotations ann{24, 16, {{1.5, 2.25}, {23.0, 15.0}}};
  PointAnnotations back = annotations_from_json(annotations_to_json(ann));
  CHECK(back.width == 24);
  CHECK(back.height == 16);
  REQUIRE(back.points.size() == 2);
  CHECK(back.points[0].x == 1.5);
  CHECK(back.points[1].y == 15.0);
}

TEST_CASE("pgm export scales to the full byte range") {
  DensityGrid g = DensityGrid::zeros(4, 2);
  g.values = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0};
  fs::path p = temp_file("pgm");
  double scale = write_grid_pgm(g, p.string());
  CHECK(scale == doctest::Approx(7.0));
  std::ifstream in(p, std::ios::binary);
  std::string header;
  in >> header;
  CHECK(header == "P5");
  int w, h, maxval;
  in >> w >> h >> maxval;
  CHECK(w == 4);
  CHECK(h == 2);
  CHECK(maxval == 255);
  in.get();
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  CHECK(bytes[0] == 0);
  CHECK(bytes[7] == 255);
  fs::remove(p);

  // Constant image: scale is zero and the payload is all zeros.
  fs::path pc = temp_file("pgm_const");
  CHECK(write_grid_pgm(DensityGrid::constant(2, 2, 3.0), pc.string()) == doctest::Approx(0.0));
  fs::remove(pc);
}

TEST_CASE("format_double emits shortest round-trip forms") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(152.0) == "152");
  double third = 1.0 / 3.0;
  CHECK(std::stod(format_double(third)) == third);
  double tiny = 6.02e-23;
  CHECK(std::stod(format_double(tiny)) == tiny);
}
