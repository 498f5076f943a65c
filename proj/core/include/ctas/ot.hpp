#pragma once

#include <string>
#include <vector>

#include "ctas/correntropy.hpp"
#include "ctas/grid.hpp"

namespace ctas {

// Pairwise ground costs between source and target supports, row-major n*m.
struct CostMatrix {
  int n = 0;  // sources
  int m = 0;  // targets
  std::vector<double> costs;
  std::vector<Point> source_locations;
  std::vector<Point> target_locations;

  double at(int i, int j) const { return costs[static_cast<std::size_t>(i) * m + j]; }
  double& at(int i, int j) { return costs[static_cast<std::size_t>(i) * m + j]; }
};

CostMatrix build_cost(const std::vector<Point>& src, const std::vector<Point>& dst,
                      const CostSpec& spec);
void validate_cost_matrix(const CostMatrix& c);

// Epsilon-annealed log-domain Sinkhorn settings. tol is the L1 marginal
// residual at which a stage stops; max_iter bounds iterations per stage.
struct SolverConfig {
  std::vector<double> eps_schedule = {1.0, 0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3, 3e-4, 1e-4};
  int max_iter = 20000;
  double tol = 1e-12;

  // Full schedule, tight residual; used by oracles and gradient checks.
  static SolverConfig accurate();
  // Coarser regularization and residual; fast enough for the training loop.
  static SolverConfig training();
};

void validate_solver_config(const SolverConfig& cfg);

// Warm-start storage for the internal Sinkhorn potentials. Owned by the
// caller (e.g. one per training scene); reused when shapes match.
struct DualCache {
  std::vector<double> f, g;
  bool valid = false;
};

struct TransportPlan {
  int n = 0, m = 0;
  std::vector<double> plan;  // row-major n*m, nonnegative
  double attained_cost = 0.0;
  // c-transform duals: dual_source[i] ~ softmin_j(C_ij - g_j), and
  // symmetrically for targets. They converge to an optimal LP dual pair as
  // eps shrinks and drive the loss gradient via the envelope theorem.
  std::vector<double> dual_source, dual_target;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  std::vector<double> stage_costs;  // attained cost after each annealing stage

  double plan_at(int i, int j) const { return plan[static_cast<std::size_t>(i) * m + j]; }
};

// Single-epsilon log-domain Sinkhorn. mu and nu must be nonnegative
// probability vectors (sums within 1e-9 of 1). Zero-mass bins are allowed:
// their plan rows/columns are zero and their reported duals are the service
// cost softmin, which is what the loss gradient needs at empty pixels.
// Non-convergence is reported through converged/residual, not thrown.
TransportPlan sinkhorn(const CostMatrix& c, const std::vector<double>& mu,
                       const std::vector<double>& nu, double eps, int max_iter, double tol,
                       DualCache* cache = nullptr);

// Runs sinkhorn over cfg.eps_schedule, warm-starting each stage from the
// previous one. stage_costs records the attained cost after each stage.
TransportPlan sinkhorn_annealed(const CostMatrix& c, const std::vector<double>& mu,
                                const std::vector<double>& nu, const SolverConfig& cfg,
                                DualCache* cache = nullptr);

// Exact solver (successive shortest paths on the transportation network).
// Test oracle only; rejects instances with n*m > 4096. Duals come from the
// final node potentials and satisfy complementary slackness exactly.
TransportPlan exact_ot(const CostMatrix& c, const std::vector<double>& mu,
                       const std::vector<double>& nu);

// A self-contained solvable instance, as exchanged with the CLI.
struct OtInstance {
  std::vector<double> mu, nu;
  std::vector<Point> src, dst;
  CostSpec cost;
};

void validate_instance(const OtInstance& inst);
std::string instance_to_json(const OtInstance& inst);
OtInstance instance_from_json(const std::string& json_text);

// Numerically safe log-sum-exp with max shift; -inf entries drop out.
double logsumexp(const double* vals, int count);

}  // namespace ctas
