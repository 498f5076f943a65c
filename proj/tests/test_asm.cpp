#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ctas/adaptive_selection.hpp"
#include "ctas/grid.hpp"
#include "oracles.hpp"

using namespace ctas;
using namespace ctas::testing;

namespace {

DensityGrid grid_from(std::vector<double> v, int w, int h) {
  DensityGrid g = DensityGrid::zeros(w, h);
  g.values = std::move(v);
  return g;
}

AsmBranchParams random_branch_params(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  std::uniform_int_distribution<int> kd(1, std::min(8, std::min(w, h)));
  AsmBranchParams p;
  p.w1 = coef(rng);
  p.b1 = coef(rng);
  p.w2 = coef(rng);
  p.b2 = coef(rng);
  p.k = kd(rng);
  return p;
}

}  // namespace

TEST_CASE("sigmoid spot values and saturation") {
  CHECK(sigmoid(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(sigmoid(2.0) == doctest::Approx(0.8807970779778823).epsilon(1e-14));
  CHECK(sigmoid(-2.0) == doctest::Approx(1.0 - 0.8807970779778823).epsilon(1e-14));
  // Logits of magnitude 30 pin the gate to within 1e-9 of its rail.
  CHECK(std::abs(sigmoid(30.0) - 1.0) <= 1e-9);
  CHECK(sigmoid(-30.0) <= 1e-9);
  // Extreme logits stay finite in both directions.
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(std::isfinite(sigmoid(-800.0)));
}

TEST_CASE("fuse spot value") {
  DensityGrid d_t = grid_from({2.0}, 1, 1);
  DensityGrid d_c = grid_from({4.0}, 1, 1);
  AttentionMap a_att{1, 1, {0.75}};
  AttentionMap a_atc{1, 1, {0.25}};
  DensityGrid z = fuse(d_t, d_c, a_att, a_atc);
  CHECK(z.values[0] == doctest::Approx(4.5).epsilon(1e-15));
}

TEST_CASE("gate saturation propagates through the module") {
  // A huge w2 bias drives d_at to 1; with a large positive block field the
  // final attention saturates too, so the fused map reduces to d_t alone
  // (a_att near 1) plus the complement path shutting off d_c (a_atc near 1).
  DensityGrid d = grid_from(std::vector<double>(16, 40.0), 4, 4);
  AsmParams p;
  p.t = {1.0, 0.0, 1.0, 30.0, 2};
  p.c = {1.0, 0.0, 1.0, 30.0, 2};
  AsmForward fwd = asm_forward(d, d, p);
  for (std::size_t i = 0; i < fwd.fused.size(); ++i) {
    CHECK(std::abs(fwd.t.attention.values[i] - 1.0) <= 1e-9);
    CHECK(std::abs(fwd.fused.values[i] - d.values[i]) <= 1e-6);
  }
}

TEST_CASE("block mixing matches the pooled means") {
  // Constant input: every block mean equals the constant, so d_b is the
  // affine image of that constant everywhere.
  DensityGrid d = grid_from(std::vector<double>(35, 3.0), 7, 5);
  AsmBranchParams p{0.5, -1.0, 1.0, 0.0, 3};
  AsmBranchOutputs out = asm_branch(d, p);
  for (double v : out.d_b.values) CHECK(v == doctest::Approx(0.5 * 3.0 - 1.0).epsilon(1e-12));
  for (double v : out.d_at.values)
    CHECK(v == doctest::Approx(sigmoid(0.5)).epsilon(1e-12));

  // k = 1 pools to the global mean.
  DensityGrid ramp = grid_from({1.0, 2.0, 3.0, 4.0}, 2, 2);
  AsmBranchParams p1{1.0, 0.0, 1.0, 0.0, 1};
  AsmBranchOutputs g = asm_branch(ramp, p1);
  for (double v : g.d_b.values) CHECK(v == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("fused output is bounded by the branch sum on fuzzed grids") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> wd(1, 12), hd(1, 12);
  std::uniform_real_distribution<double> big(-40.0, 40.0);
  for (int trial = 0; trial < 1000; ++trial) {
    int w = wd(rng), h = hd(rng);
    DensityGrid d_t = random_grid(rng, w, h, 0.0, 5.0);
    DensityGrid d_c = random_grid(rng, w, h, 0.0, 5.0);
    AsmParams p;
    p.t = random_branch_params(rng, w, h);
    p.c = random_branch_params(rng, w, h);
    if (trial % 7 == 0) {  // push some gates deep into saturation
      p.t.w2 = big(rng);
      p.c.b2 = big(rng);
    }
    AsmForward fwd = asm_forward(d_t, d_c, p);
    for (std::size_t i = 0; i < fwd.fused.size(); ++i) {
      CHECK(fwd.fused.values[i] >= 0.0);
      CHECK(fwd.fused.values[i] <=
            d_t.values[i] + d_c.values[i] + 1e-12 * (d_t.values[i] + d_c.values[i] + 1.0));
    }
  }
}

TEST_CASE("reverse-mode gradients are exact adjoints of the directional derivative") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> wd(2, 9), hd(2, 9);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    int w = wd(rng), h = hd(rng);
    DensityGrid d_t = random_grid(rng, w, h, 0.0, 3.0);
    DensityGrid d_c = random_grid(rng, w, h, 0.0, 3.0);
    AsmParams p;
    p.t = random_branch_params(rng, w, h);
    p.c = random_branch_params(rng, w, h);

    AsmTangent tan;
    tan.d_t = random_grid(rng, w, h, -1.0, 1.0);
    tan.d_c = random_grid(rng, w, h, -1.0, 1.0);
    tan.t = {coef(rng), coef(rng), coef(rng), coef(rng)};
    tan.c = {coef(rng), coef(rng), coef(rng), coef(rng)};

    DensityGrid upstream = random_grid(rng, w, h, -1.0, 1.0);

    AsmForward fwd = asm_forward(d_t, d_c, p);
    AsmGradients vjp = asm_backward(upstream, fwd, p);
    DensityGrid jvp = asm_jvp(d_t, d_c, p, tan);

    double lhs = dot(upstream.values, jvp.values);
    double rhs = dot(vjp.wrt_d_t.values, tan.d_t.values) +
                 dot(vjp.wrt_d_c.values, tan.d_c.values) + vjp.t.w1 * tan.t.w1 +
                 vjp.t.b1 * tan.t.b1 + vjp.t.w2 * tan.t.w2 + vjp.t.b2 * tan.t.b2 +
                 vjp.c.w1 * tan.c.w1 + vjp.c.b1 * tan.c.b1 + vjp.c.w2 * tan.c.w2 +
                 vjp.c.b2 * tan.c.b2;
    CHECK(std::abs(lhs - rhs) <= 1e-12 * (std::abs(lhs) + std::abs(rhs) + 1.0));
  }
}

TEST_CASE("gradients agree with central differences") {
  std::mt19937_64 rng(21);
  DensityGrid d_t = random_grid(rng, 4, 3, 0.0, 2.0);
  DensityGrid d_c = random_grid(rng, 4, 3, 0.0, 2.0);
  AsmParams p;
  p.t = {0.7, -0.2, 1.3, 0.4, 2};
  p.c = {-0.5, 0.3, 0.8, -0.6, 3};
  DensityGrid upstream = random_grid(rng, 4, 3, -1.0, 1.0);

  auto objective = [&](const DensityGrid& a, const DensityGrid& b, const AsmParams& q) {
    AsmForward f = asm_forward(a, b, q);
    return dot(upstream.values, f.fused.values);
  };

  AsmForward fwd = asm_forward(d_t, d_c, p);
  AsmGradients g = asm_backward(upstream, fwd, p);

  for (std::size_t i = 0; i < d_t.size(); ++i) {
    double fd = central_diff(
        [&](double x) {
          DensityGrid a = d_t;
          a.values[i] = x;
          return objective(a, d_c, p);
        },
        d_t.values[i], 1e-6);
    CHECK(g.wrt_d_t.values[i] == doctest::Approx(fd).epsilon(5e-6));
  }
  double fd_w1 = central_diff(
      [&](double x) {
        AsmParams q = p;
        q.c.w1 = x;
        return objective(d_t, d_c, q);
      },
      p.c.w1, 1e-6);
  CHECK(g.c.w1 == doctest::Approx(fd_w1).epsilon(5e-6));
  double fd_b2 = central_diff(
      [&](double x) {
        AsmParams q = p;
        q.t.b2 = x;
        return objective(d_t, d_c, q);
      },
      p.t.b2, 1e-6);
  CHECK(g.t.b2 == doctest::Approx(fd_b2).epsilon(5e-6));
}

TEST_CASE("validation rejects malformed inputs") {
  AttentionMap bad{2, 2, {0.5, 0.5, 0.5}};
  CHECK_THROWS_AS(validate_attention(bad), std::invalid_argument);
  AttentionMap rail{1, 1, {1.0}};
  CHECK_THROWS_AS(validate_attention(rail), std::invalid_argument);
  AttentionMap zero{1, 1, {0.0}};
  CHECK_THROWS_AS(validate_attention(zero), std::invalid_argument);
  AttentionMap ok{1, 2, {0.25, 0.75}};
  CHECK_NOTHROW(validate_attention(ok));

  AsmParams p;
  p.t.k = 0;
  CHECK_THROWS_AS(validate_asm_params(p), std::invalid_argument);
  p.t.k = 2;
  p.c.w1 = std::nan("");
  CHECK_THROWS_AS(validate_asm_params(p), std::invalid_argument);

  DensityGrid a = DensityGrid::zeros(2, 2);
  DensityGrid b = DensityGrid::zeros(3, 2);
  CHECK_THROWS_AS(asm_forward(a, b, AsmParams{}), std::invalid_argument);
  AsmForward no_cache;
  CHECK_THROWS_AS(asm_backward(a, no_cache, AsmParams{}), std::invalid_argument);

  AttentionMap att{2, 2, {0.5, 0.5, 0.5, 0.5}};
  CHECK_THROWS_AS(fuse(a, b, att, att), std::invalid_argument);
}

TEST_CASE("fusion mode names round-trip") {
  for (FusionMode m : {FusionMode::cnn_only, FusionMode::transformer_only, FusionMode::concat,
                       FusionMode::adaptive})
    CHECK(fusion_mode_from_name(fusion_mode_name(m)) == m);
  CHECK(fusion_mode_name(FusionMode::adaptive) == "asm");
  CHECK_THROWS_AS(fusion_mode_from_name("attention"), std::invalid_argument);
}

TEST_CASE("selection parameters round-trip through JSON") {
  AsmParams p;
  p.t = {0.25, -1.5, 2.0, 0.125, 4};
  p.c = {-0.75, 0.5, -1.0, 3.0, 7};
  AsmParams q = asm_params_from_json(asm_params_to_json(p));
  CHECK(q.t.w1 == p.t.w1);
  CHECK(q.t.b1 == p.t.b1);
  CHECK(q.t.w2 == p.t.w2);
  CHECK(q.t.b2 == p.t.b2);
  CHECK(q.t.k == p.t.k);
  CHECK(q.c.w1 == p.c.w1);
  CHECK(q.c.k == p.c.k);
  CHECK_THROWS(asm_params_from_json("{\"not\": \"an array\"}"));
  CHECK_THROWS(asm_params_from_json("[]"));
}
