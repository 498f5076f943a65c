#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ctas::testing {

double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

namespace {

// Solves the flows of a candidate basic solution by leaf elimination over
// the bipartite support graph. Returns false if the chosen cells do not form
// a spanning tree or imply a negative flow.
bool solve_basic(const std::vector<std::pair<int, int>>& cells, std::vector<double> row,
                 std::vector<double> col, const CostMatrix& c, double& cost_out) {
  int n = static_cast<int>(row.size()), m = static_cast<int>(col.size());
  std::vector<bool> used(cells.size(), false);
  std::vector<int> row_deg(n, 0), col_deg(m, 0);
  for (const auto& [i, j] : cells) {
    ++row_deg[i];
    ++col_deg[j];
  }
  double cost = 0.0;
  for (std::size_t solved = 0; solved < cells.size(); ++solved) {
    int pick = -1;
    for (std::size_t e = 0; e < cells.size(); ++e) {
      if (used[e]) continue;
      if (row_deg[cells[e].first] == 1 || col_deg[cells[e].second] == 1) {
        pick = static_cast<int>(e);
        break;
      }
    }
    if (pick < 0) return false;  // cycle: not a tree
    auto [i, j] = cells[pick];
    double flow = row_deg[i] == 1 ? row[i] : col[j];
    if (flow < -1e-12) return false;
    cost += flow * c.at(i, j);
    row[i] -= flow;
    col[j] -= flow;
    --row_deg[i];
    --col_deg[j];
    used[pick] = true;
  }
  for (double r : row)
    if (std::abs(r) > 1e-9) return false;
  for (double r : col)
    if (std::abs(r) > 1e-9) return false;
  cost_out = cost;
  return true;
}

}  // namespace

double brute_force_ot(const CostMatrix& c, const std::vector<double>& mu,
                      const std::vector<double>& nu) {
  if (c.n > 4 || c.m > 4) throw std::invalid_argument("brute force oracle is capped at 4x4");
  int cells_total = c.n * c.m;
  int basis = c.n + c.m - 1;
  std::vector<int> pick(basis);
  for (int i = 0; i < basis; ++i) pick[i] = i;

  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    std::vector<std::pair<int, int>> cells;
    cells.reserve(basis);
    for (int idx : pick) cells.push_back({idx / c.m, idx % c.m});
    double cost;
    if (solve_basic(cells, mu, nu, c, cost)) best = std::min(best, cost);

    // next combination
    int pos = basis - 1;
    while (pos >= 0 && pick[pos] == cells_total - basis + pos) --pos;
    if (pos < 0) break;
    ++pick[pos];
    for (int q = pos + 1; q < basis; ++q) pick[q] = pick[q - 1] + 1;
  }
  if (!std::isfinite(best)) throw std::runtime_error("no basic feasible solution found");
  return best;
}

TokenSequence naive_mha(const TokenSequence& z, const EncoderLayerParams& p) {
  int n = z.n, d = z.d, heads = p.h, dh = d / heads;
  auto project = [&](const std::vector<double>& w) {
    TokenSequence out = TokenSequence::zeros(n, d);
    for (int i = 0; i < n; ++i)
      for (int o = 0; o < d; ++o) {
        double acc = 0.0;
        for (int k = 0; k < d; ++k) acc += z.at(i, k) * w[static_cast<std::size_t>(k) * d + o];
        out.at(i, o) = acc;
      }
    return out;
  };
  TokenSequence q = project(p.w_q), k = project(p.w_k), v = project(p.w_v);
  TokenSequence out = TokenSequence::zeros(n, d);
  double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int head = 0; head < heads; ++head) {
    int c0 = head * dh;
    for (int i = 0; i < n; ++i) {
      std::vector<double> score(n);
      double hi = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int kk = 0; kk < dh; ++kk) s += q.at(i, c0 + kk) * k.at(j, c0 + kk);
        score[j] = s * scale;
        hi = std::max(hi, score[j]);
      }
      double zsum = 0.0;
      for (int j = 0; j < n; ++j) {
        score[j] = std::exp(score[j] - hi);
        zsum += score[j];
      }
      for (int j = 0; j < n; ++j) score[j] /= zsum;
      for (int kk = 0; kk < dh; ++kk) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += score[j] * v.at(j, c0 + kk);
        out.at(i, c0 + kk) = acc;
      }
    }
  }
  return out;
}

TokenSequence naive_layer_norm(const TokenSequence& z, const LayerNormParams& p) {
  TokenSequence out = TokenSequence::zeros(z.n, z.d);
  for (int i = 0; i < z.n; ++i) {
    double mean = 0.0;
    for (int k = 0; k < z.d; ++k) mean += z.at(i, k);
    mean /= z.d;
    double var = 0.0;
    for (int k = 0; k < z.d; ++k) var += (z.at(i, k) - mean) * (z.at(i, k) - mean);
    var /= z.d;
    double inv = 1.0 / std::sqrt(var + 1e-5);
    for (int k = 0; k < z.d; ++k) out.at(i, k) = p.gain[k] * (z.at(i, k) - mean) * inv + p.bias[k];
  }
  return out;
}

ToyFeatureMap naive_dilated_conv(const ToyFeatureMap& in, const Conv2d& conv) {
  int ow = conv_out_dim(in.width, conv), oh = conv_out_dim(in.height, conv);
  ToyFeatureMap out = ToyFeatureMap::zeros(conv.out_ch, ow, oh);
  for (int oc = 0; oc < conv.out_ch; ++oc)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double acc = conv.bias[oc];
        for (int ic = 0; ic < conv.in_ch; ++ic)
          for (int ky = 0; ky < conv.ksize; ++ky)
            for (int kx = 0; kx < conv.ksize; ++kx) {
              int iy = oy * conv.stride - conv.pad + ky * conv.dilation;
              int ix = ox * conv.stride - conv.pad + kx * conv.dilation;
              if (ix < 0 || iy < 0 || ix >= in.width || iy >= in.height) continue;
              double w = conv.weight[((static_cast<std::size_t>(oc) * conv.in_ch + ic) *
                                          conv.ksize +
                                      ky) *
                                         conv.ksize +
                                     kx];
              acc += w * in.at(ic, ix, iy);
            }
        out.at(oc, ox, oy) = acc;
      }
  return out;
}

std::vector<double> random_simplex(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> v(n);
  double total = 0.0;
  for (double& x : v) {
    x = u(rng);
    total += x;
  }
  for (double& x : v) x /= total;
  return v;
}

std::vector<Point> random_points(std::mt19937_64& rng, int n, double w, double h) {
  std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h);
  std::vector<Point> pts(n);
  for (Point& p : pts) p = {ux(rng), uy(rng)};
  return pts;
}

DensityGrid random_grid(std::mt19937_64& rng, int w, int h, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  DensityGrid g = DensityGrid::zeros(w, h);
  for (double& v : g.values) v = u(rng);
  return g;
}

TokenSequence random_tokens(std::mt19937_64& rng, int n, int d, double scale) {
  std::normal_distribution<double> gauss(0.0, scale);
  TokenSequence z = TokenSequence::zeros(n, d);
  for (double& v : z.values) v = gauss(rng);
  return z;
}

DensityGrid asm_jvp(const DensityGrid& d_t, const DensityGrid& d_c, const AsmParams& p,
                    const AsmTangent& tan) {
  struct BranchLin {
    std::vector<double> att, t_att;
  };
  auto run = [](const DensityGrid& d, const DensityGrid& t_d, const AsmBranchParams& bp,
                const AsmBranchGrads& tp) {
    BlockGrid pooled = block_average_pool(d, bp.k);
    BlockGrid t_pooled = block_average_pool(t_d, bp.k);
    BlockGrid mixed = pooled, t_mixed = t_pooled;
    for (int i = 0; i < bp.k * bp.k; ++i) {
      mixed.block_values[i] = bp.w1 * pooled.block_values[i] + bp.b1;
      t_mixed.block_values[i] =
          bp.w1 * t_pooled.block_values[i] + tp.w1 * pooled.block_values[i] + tp.b1;
    }
    DensityGrid d_b = upsample_blocks(mixed, d.width, d.height);
    DensityGrid t_db = upsample_blocks(t_mixed, d.width, d.height);
    BranchLin out;
    out.att.resize(d.size());
    out.t_att.resize(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      double s = sigmoid(bp.w2 * d_b.values[i] + bp.b2);
      double t_s = s * (1.0 - s) *
                   (bp.w2 * t_db.values[i] + tp.w2 * d_b.values[i] + tp.b2);
      double a = sigmoid(d_b.values[i] * s);
      double t_a = a * (1.0 - a) * (t_db.values[i] * s + d_b.values[i] * t_s);
      out.att[i] = a;
      out.t_att[i] = t_a;
    }
    return out;
  };
  BranchLin bt = run(d_t, tan.d_t, p.t, tan.t);
  BranchLin bc = run(d_c, tan.d_c, p.c, tan.c);
  DensityGrid t_fused = DensityGrid::zeros(d_t.width, d_t.height);
  for (std::size_t i = 0; i < t_fused.size(); ++i)
    t_fused.values[i] = bt.t_att[i] * d_t.values[i] + bt.att[i] * tan.d_t.values[i] -
                        bc.t_att[i] * d_c.values[i] +
                        (1.0 - bc.att[i]) * tan.d_c.values[i];
  return t_fused;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace ctas::testing
