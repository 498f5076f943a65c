#include "ctas/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ctas {

namespace {

double signum(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void require_same_shape(const DensityGrid& z, const DensityGrid& zhat) {
  if (z.width != zhat.width || z.height != zhat.height)
    throw std::invalid_argument("loss grids must have identical shapes");
}

double positive_mass(const DensityGrid& g, const char* what) {
  validate_grid(g);
  double s = 0.0;
  for (double v : g.values) {
    if (v < 0.0) throw std::invalid_argument(std::string(what) + " must be nonnegative");
    s += v;
  }
  if (!(s > 0.0)) throw std::invalid_argument(std::string(what) + " must have positive mass");
  return s;
}

std::vector<Point> pixel_centers(const DensityGrid& g) {
  std::vector<Point> pts;
  pts.reserve(g.size());
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) pts.push_back({x + 0.5, y + 0.5});
  return pts;
}

struct OtResult {
  double value = 0.0;
  DensityGrid grad;  // wrt unnormalized prediction
};

// Solves OT between the source distribution and the normalized prediction,
// then converts the target duals into a gradient with respect to the raw
// prediction: d(ot)/d(zhat_p) = (G_p - <G, nu>) / |zhat|_1.
OtResult solve_ot(const std::vector<Point>& src, const std::vector<double>& mu,
                  const DensityGrid& zhat, double zhat_mass, const CostSpec& cost,
                  const SolverConfig& cfg, DualCache* cache) {
  std::vector<double> nu(zhat.values);
  for (double& v : nu) v /= zhat_mass;
  CostMatrix c = build_cost(src, pixel_centers(zhat), cost);
  TransportPlan plan = sinkhorn_annealed(c, mu, nu, cfg, cache);

  OtResult res;
  res.value = plan.attained_cost;
  res.grad = DensityGrid::zeros(zhat.width, zhat.height);
  double mean_dual = 0.0;
  for (std::size_t j = 0; j < nu.size(); ++j) mean_dual += plan.dual_target[j] * nu[j];
  for (std::size_t j = 0; j < nu.size(); ++j)
    res.grad.values[j] = (plan.dual_target[j] - mean_dual) / zhat_mass;
  return res;
}

// Shared composite-loss core once the ground truth has been reduced to a
// source support (for OT) plus a normalized density (for the tv term).
LossBreakdown combined_core(const std::vector<Point>& src, const std::vector<double>& mu,
                            double gt_mass, const DensityGrid& gt_normed, const DensityGrid& zhat,
                            const CostSpec& cost, const SolverConfig& cfg, DualCache* cache) {
  double pred_mass = positive_mass(zhat, "prediction");
  OtResult ot = solve_ot(src, mu, zhat, pred_mass, cost, cfg, cache);

  LossBreakdown out;
  out.gt_mass = gt_mass;
  out.counting = std::abs(gt_mass - pred_mass);
  out.ot = ot.value;

  double tv = 0.0;
  std::vector<double> s(zhat.size());
  std::vector<double> r(zhat.size());
  double s_dot_r = 0.0;
  for (std::size_t q = 0; q < zhat.values.size(); ++q) {
    r[q] = zhat.values[q] / pred_mass;
    double diff = gt_normed.values[q] - r[q];
    tv += std::abs(diff);
    s[q] = signum(r[q] - gt_normed.values[q]);
    s_dot_r += s[q] * r[q];
  }
  out.tv = 0.5 * tv;
  out.total = out.counting + kOtWeight * out.ot + kTvWeight * gt_mass * out.tv;

  double count_sign = signum(pred_mass - gt_mass);
  out.grad_wrt_prediction = DensityGrid::zeros(zhat.width, zhat.height);
  for (std::size_t q = 0; q < zhat.values.size(); ++q) {
    double tv_grad = (s[q] - s_dot_r) / (2.0 * pred_mass);
    out.grad_wrt_prediction.values[q] =
        count_sign + kOtWeight * ot.grad.values[q] + kTvWeight * gt_mass * tv_grad;
  }
  return out;
}

}  // namespace

double counting_loss(const DensityGrid& z, const DensityGrid& zhat) {
  validate_grid(z);
  validate_grid(zhat);
  return std::abs(grid_sum(z) - grid_sum(zhat));
}

double tv_loss(const DensityGrid& z, const DensityGrid& zhat) {
  require_same_shape(z, zhat);
  double mz = positive_mass(z, "tv input z");
  double mh = positive_mass(zhat, "tv input zhat");
  double acc = 0.0;
  for (std::size_t q = 0; q < z.values.size(); ++q)
    acc += std::abs(z.values[q] / mz - zhat.values[q] / mh);
  return 0.5 * acc;
}

std::pair<double, DensityGrid> ot_loss(const DensityGrid& z, const DensityGrid& zhat,
                                       const CostSpec& cost, const SolverConfig& cfg,
                                       DualCache* cache) {
  require_same_shape(z, zhat);
  double gt_mass = positive_mass(z, "ot input z");
  double pred_mass = positive_mass(zhat, "ot input zhat");

  std::vector<Point> src;
  std::vector<double> mu;
  for (int y = 0; y < z.height; ++y)
    for (int x = 0; x < z.width; ++x)
      if (z.at(x, y) > 0.0) {
        src.push_back({x + 0.5, y + 0.5});
        mu.push_back(z.at(x, y) / gt_mass);
      }
  OtResult res = solve_ot(src, mu, zhat, pred_mass, cost, cfg, cache);
  return {res.value, std::move(res.grad)};
}

LossBreakdown combined_loss(const DensityGrid& z, const DensityGrid& zhat, const CostSpec& cost,
                            const SolverConfig& cfg, DualCache* cache) {
  require_same_shape(z, zhat);
  double gt_mass = positive_mass(z, "ground truth");

  std::vector<Point> src;
  std::vector<double> mu;
  DensityGrid gt_normed = DensityGrid::zeros(z.width, z.height);
  for (int y = 0; y < z.height; ++y)
    for (int x = 0; x < z.width; ++x) {
      double v = z.at(x, y);
      gt_normed.at(x, y) = v / gt_mass;
      if (v > 0.0) {
        src.push_back({x + 0.5, y + 0.5});
        mu.push_back(v / gt_mass);
      }
    }
  return combined_core(src, mu, gt_mass, gt_normed, zhat, cost, cfg, cache);
}

LossBreakdown combined_loss(const PointAnnotations& gt, const DensityGrid& zhat,
                            const CostSpec& cost, const SolverConfig& cfg, DualCache* cache) {
  validate_annotations(gt);
  validate_grid(zhat);
  if (gt.points.empty())
    throw std::invalid_argument("point-supervised loss needs at least one annotation");

  double sx = static_cast<double>(zhat.width) / gt.width;
  double sy = static_cast<double>(zhat.height) / gt.height;
  std::vector<Point> src;
  src.reserve(gt.points.size());
  for (const Point& p : gt.points) src.push_back({p.x * sx, p.y * sy});
  std::vector<double> mu(src.size(), 1.0 / static_cast<double>(src.size()));

  double gt_mass = static_cast<double>(gt.points.size());
  DensityGrid dots = dot_map(gt, zhat.width, zhat.height);
  for (double& v : dots.values) v /= gt_mass;
  return combined_core(src, mu, gt_mass, dots, zhat, cost, cfg, cache);
}

}  // namespace ctas
