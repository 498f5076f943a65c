#include "ctas/grid_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"

namespace ctas {

std::string format_double(double v) {
  char buf[32];
  // %.17g always round-trips; prefer the shortest form that does.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_grid_csv(const DensityGrid& g, const std::string& path) {
  validate_grid(g);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      if (x) out << ',';
      out << format_double(g.at(x, y));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

DensityGrid read_grid_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error("bad CSV cell '" + cell + "' in " + path);
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("ragged CSV rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("empty grid CSV: " + path);

  DensityGrid g = DensityGrid::zeros(static_cast<int>(rows.front().size()),
                                     static_cast<int>(rows.size()));
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) g.at(x, y) = rows[y][x];
  validate_grid(g);
  return g;
}

namespace {

constexpr char kGridMagic[4] = {'D', 'G', 'R', 'D'};

void put_u32_le(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32_le(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_grid_binary(const DensityGrid& g, const std::string& path) {
  validate_grid(g);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kGridMagic, 4);
  put_u32_le(out, static_cast<std::uint32_t>(g.width));
  put_u32_le(out, static_cast<std::uint32_t>(g.height));
  for (double v : g.values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

DensityGrid read_grid_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kGridMagic, 4) != 0)
    throw std::runtime_error("not a DGRD grid file: " + path);
  std::uint32_t w = get_u32_le(in), h = get_u32_le(in);
  if (!in || w == 0 || h == 0 || static_cast<std::uint64_t>(w) * h > (1u << 28))
    throw std::runtime_error("bad DGRD header in " + path);
  DensityGrid g = DensityGrid::zeros(static_cast<int>(w), static_cast<int>(h));
  for (double& v : g.values) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("truncated DGRD file: " + path);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    std::memcpy(&v, &bits, 8);
  }
  validate_grid(g);
  return g;
}

std::string annotations_to_json(const PointAnnotations& ann) {
  nlohmann::json j;
  j["width"] = ann.width;
  j["height"] = ann.height;
  j["points"] = nlohmann::json::array();
  for (const Point& p : ann.points) j["points"].push_back({p.x, p.y});
  return j.dump();
}

PointAnnotations annotations_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  PointAnnotations ann;
  ann.width = j.at("width").get<int>();
  ann.height = j.at("height").get<int>();
  for (const auto& p : j.at("points")) {
    if (!p.is_array() || p.size() != 2) throw std::runtime_error("annotation point must be [x, y]");
    ann.points.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  validate_annotations(ann);
  return ann;
}

void write_annotations(const PointAnnotations& ann, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << annotations_to_json(ann) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

PointAnnotations read_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return annotations_from_json(ss.str());
}

DensityGrid read_grid_auto(const std::string& path) {
  auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot);
  if (ext == ".csv") return read_grid_csv(path);
  if (ext == ".dgrd") return read_grid_binary(path);
  throw std::runtime_error("unknown grid extension (want .csv or .dgrd): " + path);
}

double write_grid_pgm(const DensityGrid& g, const std::string& path) {
  validate_grid(g);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  double lo = grid_min(g), hi = grid_max(g);
  double scale = hi - lo;
  out << "P5\n" << g.width << " " << g.height << "\n255\n";
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      double t = scale > 0.0 ? (g.at(x, y) - lo) / scale : 0.0;
      unsigned char byte = static_cast<unsigned char>(std::lround(t * 255.0));
      out.write(reinterpret_cast<const char*>(&byte), 1);
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
  return scale;
}

}  // namespace ctas
