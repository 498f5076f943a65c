#pragma once

#include <utility>

#include "ctas/grid.hpp"
#include "ctas/ot.hpp"

namespace ctas {

// Composite-objective weights: total = counting + 0.1*ot + 0.01*|z|_1*tv.
inline constexpr double kOtWeight = 0.1;
inline constexpr double kTvWeight = 0.01;

struct LossBreakdown {
  double counting = 0.0;  // |mass(z) - mass(zhat)|
  double ot = 0.0;        // transport cost between normalized densities
  double tv = 0.0;        // 0.5 * L1 distance between normalized densities
  double total = 0.0;
  double gt_mass = 0.0;   // |z|_1, the tv term's weight multiplier
  DensityGrid grad_wrt_prediction;  // d(total)/d(zhat), same shape as zhat
};

// |mass(z) - mass(zhat)|. No preconditions.
double counting_loss(const DensityGrid& z, const DensityGrid& zhat);

// 0.5 * |z/|z|_1 - zhat/|zhat|_1|_1, in [0, 1]. Both masses must be positive.
double tv_loss(const DensityGrid& z, const DensityGrid& zhat);

// Transport cost between the normalized densities (same-shape grids; source
// support = nonzero pixels of z, target support = every pixel of zhat), and
// its gradient with respect to the unnormalized prediction, obtained from
// the dual potentials plus the normalization chain term.
std::pair<double, DensityGrid> ot_loss(const DensityGrid& z, const DensityGrid& zhat,
                                       const CostSpec& cost, const SolverConfig& cfg,
                                       DualCache* cache = nullptr);

// Full composite loss over same-shape grids.
LossBreakdown combined_loss(const DensityGrid& z, const DensityGrid& zhat, const CostSpec& cost,
                            const SolverConfig& cfg, DualCache* cache = nullptr);

// Point-supervised variant: OT sources are the annotated points mapped into
// the prediction frame with uniform mass; counting/tv use the dot map binned
// at prediction resolution.
LossBreakdown combined_loss(const PointAnnotations& gt, const DensityGrid& zhat,
                            const CostSpec& cost, const SolverConfig& cfg,
                            DualCache* cache = nullptr);

}  // namespace ctas
