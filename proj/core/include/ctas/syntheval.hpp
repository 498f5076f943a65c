#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ctas/grid.hpp"
#include "ctas/loss.hpp"
#include "ctas/model.hpp"

namespace ctas {

// Spatial density profile of a synthetic scene: a dense/sparse split down the
// middle, a linear left-to-right intensity ramp, or a homogeneous field.
enum class Layout { halves, gradient, uniform };

std::string layout_name(Layout layout);
Layout layout_from_name(const std::string& name);

// Rates are people per kilo-pixel of frame area. The uniform layout uses
// sparse_rate alone; gradient ramps from sparse_rate (left) to dense_rate
// (right); halves puts dense_rate on the left half and sparse_rate on the
// right.
struct SceneParams {
  int width = 64;
  int height = 64;
  double sparse_rate = 2.0;
  double dense_rate = 8.0;
  Layout layout = Layout::halves;
  std::uint64_t seed = 0;
};

void validate_scene_params(const SceneParams& p);
std::string scene_params_to_json(const SceneParams& p);
SceneParams scene_params_from_json(const std::string& json_text);

struct SyntheticScene {
  SceneParams params;  // density profile plus the regeneration seed
  PointAnnotations annotations;
};

// Poisson-sampled points with region-dependent intensity. Regenerating with
// the same params (seed included) yields identical points.
SyntheticScene gen_scene(const SceneParams& params);

// Shared benchmark: scene i uses seed base.seed + i, other params unchanged.
std::vector<SyntheticScene> make_benchmark_scenes(const SceneParams& base, int count);

// Raster width for the model's input image. Narrow bumps keep heads
// localized at the toy resolutions; the generator's density artifacts use a
// caller-chosen width instead.
inline constexpr double kInputRasterSigma = 2.5;

// Unit-mass bump per annotated point; the model applies its input gain.
DensityGrid scene_to_image(const SyntheticScene& scene);

struct CountPair {
  double truth = 0.0;
  double estimate = 0.0;
};

// mse follows the root-mean-square form used alongside MAE in counting
// benchmarks, hence mae <= mse on every report.
struct EvalReport {
  double mae = 0.0;
  double mse = 0.0;
  std::vector<CountPair> per_image;
};

EvalReport mae_mse(const std::vector<CountPair>& per_image);

// Predicted count = mass of the predicted density map.
EvalReport evaluate(const CtasModel& model, const std::vector<SyntheticScene>& scenes);

struct TrainResult {
  std::vector<LossBreakdown> trace;  // one entry per step, gradient omitted
  CtasModel model;
  EvalReport report;  // final parameters evaluated on the training scenes
};

// Full-batch plain gradient descent on the composite loss, deterministic per
// seed. Per-scene dual caches warm-start the transport solves across steps.
// Non-finite loss aborts with the step index in the exception message.
TrainResult train_toy(const std::vector<SyntheticScene>& scenes, const NetConfig& net_cfg,
                      const CostSpec& cost, int steps, double lr, std::uint64_t seed,
                      const SolverConfig& solver = SolverConfig::training());

// Grid sweep over fusion mode, encoder depth, and cost bandwidth (+inf means
// the squared-Euclidean cost). Every configuration trains on the same
// benchmark scenes with the same seed, so rows are comparable and the
// sigma=inf rows are bit-identical to explicit l2 runs.
struct AblationSpec {
  std::vector<FusionMode> fusions = {FusionMode::cnn_only, FusionMode::transformer_only,
                                     FusionMode::concat, FusionMode::adaptive};
  std::vector<int> layer_counts = {0, 2, 4, 6, 8};
  std::vector<double> sigmas = {4.0, 8.0, 16.0, 32.0,
                                std::numeric_limits<double>::infinity()};
  // 64x64 is the smallest frame whose stride-16 feature map admits every toy
  // dilation rate.
  SceneParams scene_params{64, 64};
  int n_scenes = 2;
  int steps = 5;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct AblationRow {
  std::string config_id;
  FusionMode fusion = FusionMode::adaptive;
  int n_layers = 0;
  double sigma = 0.0;
  double mae = 0.0;
  double mse = 0.0;
  int steps = 0;
  std::uint64_t seed = 0;
};

std::vector<AblationRow> ablate(const AblationSpec& spec);

// "inf" for +infinity, shortest round-tripping decimal otherwise.
std::string sigma_label(double sigma);

// step,counting,ot,tv,total
void write_trace_csv(const std::vector<LossBreakdown>& trace, const std::string& path);

// config_id,fusion,n_layers,sigma,mae,mse,steps,seed
void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path);

}  // namespace ctas
