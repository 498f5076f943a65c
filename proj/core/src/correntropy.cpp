#include "ctas/correntropy.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ctas {

namespace {

double dist_sq(const Point& a, const Point& b) {
  double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

void require_finite(const Point& p, const char* what) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y))
    throw std::invalid_argument(std::string(what) + " must have finite coordinates");
}

}  // namespace

void validate_kernel(const KernelConfig& cfg) {
  if (!(cfg.sigma > 0.0) || !std::isfinite(cfg.sigma))
    throw std::invalid_argument("kernel sigma must be positive and finite");
}

double gaussian_kernel(const Point& x, const Point& y, const KernelConfig& cfg) {
  validate_kernel(cfg);
  require_finite(x, "kernel input x");
  require_finite(y, "kernel input y");
  double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * cfg.sigma);
  return norm * std::exp(-dist_sq(x, y) / (2.0 * cfg.sigma * cfg.sigma));
}

double empirical_correntropy(const std::vector<Point>& xs, const std::vector<Point>& ys,
                             const KernelConfig& cfg) {
  validate_kernel(cfg);
  if (xs.empty() || xs.size() != ys.size())
    throw std::invalid_argument("empirical correntropy needs equal-length nonempty samples");
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) acc += gaussian_kernel(xs[i], ys[i], cfg);
  return acc / static_cast<double>(xs.size());
}

double correntropy_cost_sq(double dist_sq, const KernelConfig& cfg) {
  validate_kernel(cfg);
  if (!(dist_sq >= 0.0) || !std::isfinite(dist_sq))
    throw std::invalid_argument("squared distance must be finite and nonnegative");
  return dist_sq * std::exp(dist_sq / (2.0 * cfg.sigma * cfg.sigma));
}

double correntropy_cost(const Point& a, const Point& b, const KernelConfig& cfg) {
  require_finite(a, "cost input a");
  require_finite(b, "cost input b");
  return correntropy_cost_sq(dist_sq(a, b), cfg);
}

void validate_cost_spec(const CostSpec& spec) {
  if (spec.kind == CostKind::correntropy) {
    if (std::isnan(spec.sigma) || spec.sigma <= 0.0)
      throw std::invalid_argument("correntropy cost needs sigma > 0 (or +inf for the l2 limit)");
  }
}

bool is_l2_equivalent(const CostSpec& spec) {
  return spec.kind == CostKind::l2 ||
         (spec.kind == CostKind::correntropy && std::isinf(spec.sigma));
}

double point_cost_sq(double dist_sq, const CostSpec& spec) {
  validate_cost_spec(spec);
  if (!(dist_sq >= 0.0) || !std::isfinite(dist_sq))
    throw std::invalid_argument("squared distance must be finite and nonnegative");
  if (is_l2_equivalent(spec)) return dist_sq;
  return dist_sq * std::exp(dist_sq / (2.0 * spec.sigma * spec.sigma));
}

double point_cost(const Point& a, const Point& b, const CostSpec& spec) {
  require_finite(a, "cost input a");
  require_finite(b, "cost input b");
  return point_cost_sq(dist_sq(a, b), spec);
}

}  // namespace ctas
