#include "ctas/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ctas {

namespace {

int block_lo(int dim, int k, int idx) { return static_cast<int>(static_cast<long long>(dim) * idx / k); }

}  // namespace

DensityGrid DensityGrid::zeros(int width, int height) {
  DensityGrid g;
  g.width = width;
  g.height = height;
  g.values.assign(static_cast<std::size_t>(width) * height, 0.0);
  return g;
}

DensityGrid DensityGrid::constant(int width, int height, double value) {
  DensityGrid g = zeros(width, height);
  std::fill(g.values.begin(), g.values.end(), value);
  return g;
}

double grid_sum(const DensityGrid& g) {
  double s = 0.0;
  for (double v : g.values) s += v;
  return s;
}

double grid_mean(const DensityGrid& g) {
  if (g.values.empty()) return 0.0;
  return grid_sum(g) / static_cast<double>(g.values.size());
}

double grid_min(const DensityGrid& g) {
  return *std::min_element(g.values.begin(), g.values.end());
}

double grid_max(const DensityGrid& g) {
  return *std::max_element(g.values.begin(), g.values.end());
}

void validate_grid(const DensityGrid& g) {
  if (g.width < 1 || g.height < 1) throw std::invalid_argument("grid dimensions must be >= 1");
  if (g.values.size() != static_cast<std::size_t>(g.width) * g.height)
    throw std::invalid_argument("grid value count does not match width*height");
  for (double v : g.values)
    if (!std::isfinite(v)) throw std::invalid_argument("grid contains non-finite values");
}

void validate_annotations(const PointAnnotations& ann) {
  if (ann.width < 1 || ann.height < 1) throw std::invalid_argument("annotation frame must be >= 1x1");
  for (const Point& p : ann.points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw std::invalid_argument("annotation point is not finite");
    if (p.x < 0.0 || p.x >= ann.width || p.y < 0.0 || p.y >= ann.height)
      throw std::invalid_argument("annotation point outside frame");
  }
}

DensityGrid gaussian_rasterize(const PointAnnotations& ann, double sigma_g) {
  validate_annotations(ann);
  if (!(sigma_g > 0.0) || !std::isfinite(sigma_g))
    throw std::invalid_argument("sigma_g must be positive and finite");

  DensityGrid out = DensityGrid::zeros(ann.width, ann.height);
  const double radius = std::max(4.0 * sigma_g, 1.0);
  const double inv_two_sigma2 = 1.0 / (2.0 * sigma_g * sigma_g);

  for (const Point& p : ann.points) {
    int x0 = std::max(0, static_cast<int>(std::floor(p.x - radius)));
    int x1 = std::min(ann.width - 1, static_cast<int>(std::ceil(p.x + radius)));
    int y0 = std::max(0, static_cast<int>(std::floor(p.y - radius)));
    int y1 = std::min(ann.height - 1, static_cast<int>(std::ceil(p.y + radius)));

    // Weight by the Gaussian at each pixel center, then renormalize over the
    // clipped window so every bump carries exactly unit mass.
    double total = 0.0;
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        double dx = (x + 0.5) - p.x;
        double dy = (y + 0.5) - p.y;
        total += std::exp(-(dx * dx + dy * dy) * inv_two_sigma2);
      }
    }
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        double dx = (x + 0.5) - p.x;
        double dy = (y + 0.5) - p.y;
        out.at(x, y) += std::exp(-(dx * dx + dy * dy) * inv_two_sigma2) / total;
      }
    }
  }
  return out;
}

BlockGrid block_average_pool(const DensityGrid& g, int k) {
  validate_grid(g);
  if (k < 1) throw std::invalid_argument("block count k must be >= 1");
  if (k > std::min(g.width, g.height))
    throw std::invalid_argument("block count k exceeds the smaller grid dimension");

  BlockGrid b;
  b.k = k;
  b.block_values.assign(static_cast<std::size_t>(k) * k, 0.0);
  for (int by = 0; by < k; ++by) {
    int ylo = block_lo(g.height, k, by), yhi = block_lo(g.height, k, by + 1);
    for (int bx = 0; bx < k; ++bx) {
      int xlo = block_lo(g.width, k, bx), xhi = block_lo(g.width, k, bx + 1);
      double s = 0.0;
      for (int y = ylo; y < yhi; ++y)
        for (int x = xlo; x < xhi; ++x) s += g.at(x, y);
      b.at(bx, by) = s / (static_cast<double>(yhi - ylo) * (xhi - xlo));
    }
  }
  return b;
}

DensityGrid block_pool_adjoint(const BlockGrid& b, int out_w, int out_h) {
  if (b.k < 1 || b.block_values.size() != static_cast<std::size_t>(b.k) * b.k)
    throw std::invalid_argument("malformed block grid");
  if (b.k > std::min(out_w, out_h))
    throw std::invalid_argument("block count k exceeds the smaller grid dimension");

  DensityGrid out = DensityGrid::zeros(out_w, out_h);
  for (int by = 0; by < b.k; ++by) {
    int ylo = block_lo(out_h, b.k, by), yhi = block_lo(out_h, b.k, by + 1);
    for (int bx = 0; bx < b.k; ++bx) {
      int xlo = block_lo(out_w, b.k, bx), xhi = block_lo(out_w, b.k, bx + 1);
      double v = b.at(bx, by) / (static_cast<double>(yhi - ylo) * (xhi - xlo));
      for (int y = ylo; y < yhi; ++y)
        for (int x = xlo; x < xhi; ++x) out.at(x, y) += v;
    }
  }
  return out;
}

namespace {

struct LerpCoef {
  int lo;
  int hi;
  double w_hi;  // weight of hi; lo gets 1 - w_hi
};

// Source coordinate for output index i under the (i + 0.5)/n convention,
// clamped so border samples clamp to the edge texels.
LerpCoef lerp_coef(int out_i, int out_n, int in_n) {
  double src = (out_i + 0.5) * static_cast<double>(in_n) / out_n - 0.5;
  if (src <= 0.0) return {0, 0, 0.0};
  if (src >= in_n - 1) return {in_n - 1, in_n - 1, 0.0};
  int lo = static_cast<int>(std::floor(src));
  return {lo, lo + 1, src - lo};
}

}  // namespace

DensityGrid bilinear_upsample(const DensityGrid& src, int out_w, int out_h) {
  validate_grid(src);
  if (out_w < 1 || out_h < 1) throw std::invalid_argument("output dimensions must be >= 1");

  if (out_w == src.width && out_h == src.height) return src;

  DensityGrid out = DensityGrid::zeros(out_w, out_h);
  std::vector<LerpCoef> xs(out_w), ys(out_h);
  for (int x = 0; x < out_w; ++x) xs[x] = lerp_coef(x, out_w, src.width);
  for (int y = 0; y < out_h; ++y) ys[y] = lerp_coef(y, out_h, src.height);

  for (int y = 0; y < out_h; ++y) {
    const LerpCoef& cy = ys[y];
    for (int x = 0; x < out_w; ++x) {
      const LerpCoef& cx = xs[x];
      double top = src.at(cx.lo, cy.lo) * (1.0 - cx.w_hi) + src.at(cx.hi, cy.lo) * cx.w_hi;
      double bot = src.at(cx.lo, cy.hi) * (1.0 - cx.w_hi) + src.at(cx.hi, cy.hi) * cx.w_hi;
      out.at(x, y) = top * (1.0 - cy.w_hi) + bot * cy.w_hi;
    }
  }
  return out;
}

DensityGrid bilinear_upsample_adjoint(const DensityGrid& grad_out, int in_w, int in_h) {
  validate_grid(grad_out);
  if (in_w < 1 || in_h < 1) throw std::invalid_argument("input dimensions must be >= 1");

  if (grad_out.width == in_w && grad_out.height == in_h) return grad_out;

  DensityGrid grad_in = DensityGrid::zeros(in_w, in_h);
  std::vector<LerpCoef> xs(grad_out.width), ys(grad_out.height);
  for (int x = 0; x < grad_out.width; ++x) xs[x] = lerp_coef(x, grad_out.width, in_w);
  for (int y = 0; y < grad_out.height; ++y) ys[y] = lerp_coef(y, grad_out.height, in_h);

  for (int y = 0; y < grad_out.height; ++y) {
    const LerpCoef& cy = ys[y];
    for (int x = 0; x < grad_out.width; ++x) {
      const LerpCoef& cx = xs[x];
      double g = grad_out.at(x, y);
      grad_in.at(cx.lo, cy.lo) += g * (1.0 - cx.w_hi) * (1.0 - cy.w_hi);
      grad_in.at(cx.hi, cy.lo) += g * cx.w_hi * (1.0 - cy.w_hi);
      grad_in.at(cx.lo, cy.hi) += g * (1.0 - cx.w_hi) * cy.w_hi;
      grad_in.at(cx.hi, cy.hi) += g * cx.w_hi * cy.w_hi;
    }
  }
  return grad_in;
}

DensityGrid upsample_blocks(const BlockGrid& b, int out_w, int out_h) {
  DensityGrid as_grid;
  as_grid.width = b.k;
  as_grid.height = b.k;
  as_grid.values = b.block_values;
  return bilinear_upsample(as_grid, out_w, out_h);
}

BlockGrid bilinear_upsample_adjoint_blocks(const DensityGrid& grad_out, int k) {
  DensityGrid as_grid = bilinear_upsample_adjoint(grad_out, k, k);
  BlockGrid b;
  b.k = k;
  b.block_values = std::move(as_grid.values);
  return b;
}

DensityGrid dot_map(const PointAnnotations& ann, int dst_w, int dst_h) {
  validate_annotations(ann);
  if (dst_w < 1 || dst_h < 1) throw std::invalid_argument("destination dimensions must be >= 1");

  DensityGrid out = DensityGrid::zeros(dst_w, dst_h);
  const double sx = static_cast<double>(dst_w) / ann.width;
  const double sy = static_cast<double>(dst_h) / ann.height;
  for (const Point& p : ann.points) {
    int x = std::min(dst_w - 1, static_cast<int>(p.x * sx));
    int y = std::min(dst_h - 1, static_cast<int>(p.y * sy));
    out.at(x, y) += 1.0;
  }
  return out;
}

}  // namespace ctas
