#pragma once

#include <string>

#include "ctas/grid.hpp"

namespace ctas {

/// One row per grid row, comma-separated decimal floats, no header.
void write_grid_csv(const DensityGrid& g, const std::string& path);
DensityGrid read_grid_csv(const std::string& path);

/// Magic "DGRD", u32 width, u32 height, then width*height little-endian f64
/// in row-major order.
void write_grid_binary(const DensityGrid& g, const std::string& path);
DensityGrid read_grid_binary(const std::string& path);

/// {"width": int, "height": int, "points": [[x, y], ...]}
std::string annotations_to_json(const PointAnnotations& ann);
PointAnnotations annotations_from_json(const std::string& json_text);
void write_annotations(const PointAnnotations& ann, const std::string& path);
PointAnnotations read_annotations(const std::string& path);

/// Reads a grid by extension: ".csv" or ".dgrd".
DensityGrid read_grid_auto(const std::string& path);

/// Binary P5, maxval 255, values min-max scaled per image.
/// Returns the scale (max - min) used, 0 for a constant image.
double write_grid_pgm(const DensityGrid& g, const std::string& path);

/// Shortest decimal form that round-trips a double.
std::string format_double(double v);

}  // namespace ctas
