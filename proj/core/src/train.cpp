#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "ctas/syntheval.hpp"

namespace ctas {

EvalReport evaluate(const CtasModel& model, const std::vector<SyntheticScene>& scenes) {
  if (scenes.empty()) throw std::invalid_argument("evaluation needs at least one scene");
  std::vector<CountPair> pairs;
  pairs.reserve(scenes.size());
  for (const SyntheticScene& scene : scenes) {
    ModelForward fwd = model_forward(model, scene_to_image(scene));
    pairs.push_back({static_cast<double>(scene.annotations.points.size()),
                     grid_sum(fwd.prediction)});
  }
  return mae_mse(pairs);
}

TrainResult train_toy(const std::vector<SyntheticScene>& scenes, const NetConfig& net_cfg,
                      const CostSpec& cost, int steps, double lr, std::uint64_t seed,
                      const SolverConfig& solver) {
  if (scenes.empty()) throw std::invalid_argument("training needs at least one scene");
  if (steps < 1) throw std::invalid_argument("training needs at least one step");
  if (!std::isfinite(lr) || lr < 0.0)
    throw std::invalid_argument("learning rate must be finite and nonnegative");
  validate_cost_spec(cost);
  validate_solver_config(solver);

  TrainResult result;
  result.model = make_model(net_cfg, seed);

  std::vector<DensityGrid> images;
  images.reserve(scenes.size());
  for (const SyntheticScene& scene : scenes) {
    if (scene.annotations.points.empty())
      throw std::invalid_argument("training scenes must contain at least one point");
    images.push_back(scene_to_image(scene));
  }

  std::vector<DualCache> caches(scenes.size());  // warm starts, one per scene
  std::vector<ParamView> views = param_registry(result.model);
  double inv_n = 1.0 / static_cast<double>(scenes.size());

  // Fixed-step descent on a kinked objective ends in a limit cycle, not a
  // point; the tail average of the iterates is the classical stabiliser and
  // is what the trained model reports.
  int tail = std::max(1, std::min(100, steps / 5));
  std::vector<std::vector<double>> tail_sum(views.size());
  for (std::size_t v = 0; v < views.size(); ++v) tail_sum[v].assign(views[v].count, 0.0);

  for (int step = 0; step < steps; ++step) {
    zero_grads(result.model);
    LossBreakdown mean;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      ModelForward fwd = model_forward(result.model, images[s]);
      LossBreakdown lb =
          combined_loss(scenes[s].annotations, fwd.prediction, cost, solver, &caches[s]);
      model_backward(result.model, fwd, lb.grad_wrt_prediction);
      mean.counting += lb.counting * inv_n;
      mean.ot += lb.ot * inv_n;
      mean.tv += lb.tv * inv_n;
      mean.total += lb.total * inv_n;
      mean.gt_mass += lb.gt_mass * inv_n;
    }
    if (!std::isfinite(mean.total))
      throw std::runtime_error("training diverged at step " + std::to_string(step) +
                               ": non-finite loss");
    result.trace.push_back(mean);
    double scale = lr * inv_n;  // batch gradient is the mean over scenes
    for (ParamView& view : views)
      for (std::size_t k = 0; k < view.count; ++k) view.data[k] -= scale * view.grad[k];
    if (step >= steps - tail)
      for (std::size_t v = 0; v < views.size(); ++v)
        for (std::size_t k = 0; k < views[v].count; ++k) tail_sum[v][k] += views[v].data[k];
  }

  double inv_tail = 1.0 / static_cast<double>(tail);
  for (std::size_t v = 0; v < views.size(); ++v)
    for (std::size_t k = 0; k < views[v].count; ++k) views[v].data[k] = tail_sum[v][k] * inv_tail;

  result.report = evaluate(result.model, scenes);
  return result;
}

std::vector<AblationRow> ablate(const AblationSpec& spec) {
  if (spec.fusions.empty() || spec.layer_counts.empty() || spec.sigmas.empty())
    throw std::invalid_argument("ablation grid must be nonempty along every axis");
  if (spec.jobs < 1) throw std::invalid_argument("jobs must be positive");
  for (int n : spec.layer_counts)
    if (n != 0 && n != 2 && n != 4 && n != 6 && n != 8)
      throw std::invalid_argument("encoder depth must be one of {0, 2, 4, 6, 8}");
  for (double sigma : spec.sigmas)
    if (std::isnan(sigma) || sigma <= 0.0)
      throw std::invalid_argument("bandwidths must be positive (or +inf for the l2 cost)");

  const std::vector<SyntheticScene> scenes =
      make_benchmark_scenes(spec.scene_params, spec.n_scenes);

  struct Cell {
    FusionMode fusion;
    int n_layers;
    double sigma;
  };
  std::vector<Cell> grid;
  for (FusionMode fusion : spec.fusions)
    for (int n_layers : spec.layer_counts)
      for (double sigma : spec.sigmas) grid.push_back({fusion, n_layers, sigma});

  std::vector<AblationRow> rows(grid.size());
  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;

  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= grid.size()) return;
      try {
        const Cell& cell = grid[i];
        NetConfig cfg;
        cfg.fusion = cell.fusion;
        cfg.n_layers = cell.n_layers;
        CostSpec cost = CostSpec::correntropy(cell.sigma);  // +inf dispatches to l2
        TrainResult trained =
            train_toy(scenes, cfg, cost, spec.steps, spec.lr, spec.seed);
        rows[i] = {fusion_mode_name(cell.fusion) + "-l" + std::to_string(cell.n_layers) +
                       "-s" + sigma_label(cell.sigma),
                   cell.fusion,
                   cell.n_layers,
                   cell.sigma,
                   trained.report.mae,
                   trained.report.mse,
                   spec.steps,
                   spec.seed};
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  if (spec.jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    int threads = static_cast<int>(
        std::min(static_cast<std::size_t>(spec.jobs), grid.size()));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

}  // namespace ctas
