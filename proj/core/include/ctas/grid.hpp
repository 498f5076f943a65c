#pragma once

#include <cstddef>
#include <vector>

namespace ctas {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Nonnegative 2-D scalar field, row-major, one value per pixel.
/// Used both for predicted/ground-truth density maps and as a generic
/// scalar field by the resampling primitives below.
struct DensityGrid {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  static DensityGrid zeros(int width, int height);
  static DensityGrid constant(int width, int height, double value);

  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }

  std::size_t size() const { return values.size(); }
};

double grid_sum(const DensityGrid& g);
double grid_mean(const DensityGrid& g);
double grid_min(const DensityGrid& g);
double grid_max(const DensityGrid& g);

/// Validates dimensions, value-count and finiteness; throws std::invalid_argument.
void validate_grid(const DensityGrid& g);

/// Head positions within a width x height frame. Every point must satisfy
/// 0 <= x < width, 0 <= y < height; the point count is the ground-truth count.
struct PointAnnotations {
  int width = 0;
  int height = 0;
  std::vector<Point> points;
};

void validate_annotations(const PointAnnotations& ann);

/// k x k grid of block means produced by block_average_pool.
struct BlockGrid {
  int k = 0;
  std::vector<double> block_values;  // row-major k x k

  double& at(int bx, int by) { return block_values[static_cast<std::size_t>(by) * k + bx]; }
  double at(int bx, int by) const { return block_values[static_cast<std::size_t>(by) * k + bx]; }
};

/// Smooths each annotated point into a truncated isotropic Gaussian bump of
/// exactly unit mass (truncation at 4*sigma_g, renormalized over the in-frame
/// window), so the total mass of the result equals the point count.
DensityGrid gaussian_rasterize(const PointAnnotations& ann, double sigma_g);

/// Partitions the grid into k x k blocks (even integer partition; block sizes
/// along a dimension differ by at most one when k does not divide it) and
/// stores the mean of each block.
BlockGrid block_average_pool(const DensityGrid& g, int k);

/// Adjoint of block_average_pool: spreads each block value uniformly over the
/// pixels of its block, divided by the block's pixel count.
/// <pool(x), y> == <x, block_pool_adjoint(y)> for matching shapes.
DensityGrid block_pool_adjoint(const BlockGrid& b, int out_w, int out_h);

/// Bilinear interpolation with sample centers at (i + 0.5) / n in both grids
/// (align-corners-false). Constant fields map to constant fields; outputs
/// stay within [min(src), max(src)].
DensityGrid bilinear_upsample(const DensityGrid& src, int out_w, int out_h);

/// Adjoint scatter of bilinear_upsample for a fixed (in, out) shape pair:
/// <upsample(x), y> == <x, bilinear_upsample_adjoint(y, in_w, in_h)>.
DensityGrid bilinear_upsample_adjoint(const DensityGrid& grad_out, int in_w, int in_h);

/// Expands a k x k block grid to out_w x out_h via bilinear interpolation.
DensityGrid upsample_blocks(const BlockGrid& b, int out_w, int out_h);

/// Adjoint of upsample_blocks: scatters a full-resolution gradient back onto
/// a k x k block grid.
BlockGrid bilinear_upsample_adjoint_blocks(const DensityGrid& grad_out, int k);

/// Bins each annotated point into the pixel of a dst_w x dst_h grid that
/// contains it after scaling frame coordinates to the destination resolution.
/// The result carries one unit of mass per point (the dot-annotation map).
DensityGrid dot_map(const PointAnnotations& ann, int dst_w, int dst_h);

}  // namespace ctas
