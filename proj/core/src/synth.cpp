#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "ctas/grid_io.hpp"
#include "ctas/syntheval.hpp"
#include "json.hpp"

namespace ctas {

std::string layout_name(Layout layout) {
  switch (layout) {
    case Layout::halves: return "halves";
    case Layout::gradient: return "gradient";
    case Layout::uniform: return "uniform";
  }
  throw std::invalid_argument("unknown layout");
}

Layout layout_from_name(const std::string& name) {
  if (name == "halves") return Layout::halves;
  if (name == "gradient") return Layout::gradient;
  if (name == "uniform") return Layout::uniform;
  throw std::invalid_argument("unknown layout name: " + name);
}

void validate_scene_params(const SceneParams& p) {
  if (p.width < 1 || p.height < 1) throw std::invalid_argument("scene dims must be positive");
  if (!(p.sparse_rate >= 0.0) || !(p.dense_rate >= 0.0) || !std::isfinite(p.sparse_rate) ||
      !std::isfinite(p.dense_rate))
    throw std::invalid_argument("scene rates must be finite and nonnegative");
}

std::string scene_params_to_json(const SceneParams& p) {
  nlohmann::json j;
  j["width"] = p.width;
  j["height"] = p.height;
  j["sparse_rate"] = p.sparse_rate;
  j["dense_rate"] = p.dense_rate;
  j["layout"] = layout_name(p.layout);
  j["seed"] = p.seed;
  return j.dump(2);
}

SceneParams scene_params_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  SceneParams p;
  if (j.contains("width")) p.width = j.at("width").get<int>();
  if (j.contains("height")) p.height = j.at("height").get<int>();
  if (j.contains("sparse_rate")) p.sparse_rate = j.at("sparse_rate").get<double>();
  if (j.contains("dense_rate")) p.dense_rate = j.at("dense_rate").get<double>();
  if (j.contains("layout")) p.layout = layout_from_name(j.at("layout").get<std::string>());
  if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
  validate_scene_params(p);
  return p;
}

namespace {

constexpr double kKiloPixel = 1000.0;

// Homogeneous Poisson points over an axis-aligned box.
void sample_box(std::mt19937_64& rng, double rate_per_kpx, double x0, double x1, double y0,
                double y1, std::vector<Point>& out) {
  double area_kpx = (x1 - x0) * (y1 - y0) / kKiloPixel;
  double mean = rate_per_kpx * area_kpx;
  if (mean <= 0.0) return;
  std::poisson_distribution<int> count_dist(mean);
  int count = count_dist(rng);
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
  for (int i = 0; i < count; ++i) {
    double x = ux(rng);
    double y = uy(rng);
    out.push_back({x, y});
  }
}

}  // namespace

SyntheticScene gen_scene(const SceneParams& params) {
  validate_scene_params(params);
  std::mt19937_64 rng(params.seed);
  double w = params.width, h = params.height;

  SyntheticScene scene;
  scene.params = params;
  scene.annotations.width = params.width;
  scene.annotations.height = params.height;
  std::vector<Point>& pts = scene.annotations.points;

  switch (params.layout) {
    case Layout::uniform:
      sample_box(rng, params.sparse_rate, 0.0, w, 0.0, h, pts);
      break;
    case Layout::halves:
      sample_box(rng, params.dense_rate, 0.0, w / 2.0, 0.0, h, pts);
      sample_box(rng, params.sparse_rate, w / 2.0, w, 0.0, h, pts);
      break;
    case Layout::gradient: {
      // Inhomogeneous Poisson via thinning against the peak rate. The
      // intensity ramps linearly in x from sparse_rate to dense_rate.
      double peak = std::max(params.sparse_rate, params.dense_rate);
      if (peak > 0.0) {
        std::poisson_distribution<int> count_dist(peak * w * h / kKiloPixel);
        int candidates = count_dist(rng);
        std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h), accept(0.0, 1.0);
        for (int i = 0; i < candidates; ++i) {
          double x = ux(rng);
          double y = uy(rng);
          double u = accept(rng);
          double rate =
              params.sparse_rate + (params.dense_rate - params.sparse_rate) * (x / w);
          if (u * peak < rate) pts.push_back({x, y});
        }
      }
      break;
    }
  }
  validate_annotations(scene.annotations);
  return scene;
}

std::vector<SyntheticScene> make_benchmark_scenes(const SceneParams& base, int count) {
  if (count < 1) throw std::invalid_argument("benchmark needs at least one scene");
  std::vector<SyntheticScene> scenes;
  scenes.reserve(count);
  for (int i = 0; i < count; ++i) {
    SceneParams p = base;
    p.seed = base.seed + static_cast<std::uint64_t>(i);
    scenes.push_back(gen_scene(p));
  }
  return scenes;
}

DensityGrid scene_to_image(const SyntheticScene& scene) {
  return gaussian_rasterize(scene.annotations, kInputRasterSigma);
}

EvalReport mae_mse(const std::vector<CountPair>& per_image) {
  if (per_image.empty()) throw std::invalid_argument("metrics need at least one image");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (const CountPair& pair : per_image) {
    double err = pair.estimate - pair.truth;
    abs_sum += std::abs(err);
    sq_sum += err * err;
  }
  EvalReport report;
  report.per_image = per_image;
  report.mae = abs_sum / per_image.size();
  report.mse = std::sqrt(sq_sum / per_image.size());
  return report;
}

std::string sigma_label(double sigma) {
  if (std::isinf(sigma) && sigma > 0.0) return "inf";
  return format_double(sigma);
}

void write_trace_csv(const std::vector<LossBreakdown>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace csv: " + path);
  out << "step,counting,ot,tv,total\n";
  for (std::size_t i = 0; i < trace.size(); ++i)
    out << i << ',' << format_double(trace[i].counting) << ',' << format_double(trace[i].ot)
        << ',' << format_double(trace[i].tv) << ',' << format_double(trace[i].total) << '\n';
  if (!out) throw std::runtime_error("failed while writing trace csv: " + path);
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write ablation csv: " + path);
  out << "config_id,fusion,n_layers,sigma,mae,mse,steps,seed\n";
  for (const AblationRow& row : rows)
    out << row.config_id << ',' << fusion_mode_name(row.fusion) << ',' << row.n_layers << ','
        << sigma_label(row.sigma) << ',' << format_double(row.mae) << ','
        << format_double(row.mse) << ',' << row.steps << ',' << row.seed << '\n';
  if (!out) throw std::runtime_error("failed while writing ablation csv: " + path);
}

}  // namespace ctas
