#pragma once

#include <vector>

#include "ctas/grid.hpp"

namespace ctas {

// Gaussian kernel bandwidth, in pixels. Must be positive and finite.
struct KernelConfig {
  double sigma = 16.0;
};

void validate_kernel(const KernelConfig& cfg);

// (1/(sqrt(2*pi)*sigma)) * exp(-|x-y|^2 / (2*sigma^2))
double gaussian_kernel(const Point& x, const Point& y, const KernelConfig& cfg);

// Mean of gaussian_kernel over paired samples. Lists must be the same
// nonzero length.
double empirical_correntropy(const std::vector<Point>& xs, const std::vector<Point>& ys,
                             const KernelConfig& cfg);

// Robust transport ground cost: |a-b|^2 * exp(|a-b|^2 / (2*sigma^2)).
// Dominates the squared-Euclidean cost and recovers it as sigma grows.
double correntropy_cost(const Point& a, const Point& b, const KernelConfig& cfg);

// Same cost as a function of squared distance (shared by grid-support costs).
double correntropy_cost_sq(double dist_sq, const KernelConfig& cfg);

// Ground-cost selector used by the transport solver and the CLI.
// kind==correntropy with sigma == +inf dispatches to the l2 branch, so the
// two produce bit-identical cost matrices in that limit.
enum class CostKind { l2, correntropy };

struct CostSpec {
  CostKind kind = CostKind::l2;
  double sigma = 16.0;  // ignored for l2

  static CostSpec l2() { return {CostKind::l2, 0.0}; }
  static CostSpec correntropy(double sigma) { return {CostKind::correntropy, sigma}; }
};

void validate_cost_spec(const CostSpec& spec);
bool is_l2_equivalent(const CostSpec& spec);
double point_cost(const Point& a, const Point& b, const CostSpec& spec);
double point_cost_sq(double dist_sq, const CostSpec& spec);

}  // namespace ctas
