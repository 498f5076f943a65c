#include "ctas/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace ctas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMassTol = 1e-9;

void validate_marginals(const CostMatrix& c, const std::vector<double>& mu,
                        const std::vector<double>& nu) {
  if (static_cast<int>(mu.size()) != c.n || static_cast<int>(nu.size()) != c.m)
    throw std::invalid_argument("marginal sizes must match the cost matrix");
  double mu_sum = 0.0, nu_sum = 0.0;
  for (double v : mu) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("mu must be nonnegative");
    mu_sum += v;
  }
  for (double v : nu) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("nu must be nonnegative");
    nu_sum += v;
  }
  if (std::abs(mu_sum - 1.0) > kMassTol || std::abs(nu_sum - 1.0) > kMassTol)
    throw std::invalid_argument("marginals must each sum to 1 within 1e-9");
}

}  // namespace

double logsumexp(const double* vals, int count) {
  double hi = -kInf;
  for (int i = 0; i < count; ++i) hi = std::max(hi, vals[i]);
  if (hi == -kInf) return -kInf;
  double acc = 0.0;
  for (int i = 0; i < count; ++i) acc += std::exp(vals[i] - hi);
  return hi + std::log(acc);
}

CostMatrix build_cost(const std::vector<Point>& src, const std::vector<Point>& dst,
                      const CostSpec& spec) {
  if (src.empty() || dst.empty()) throw std::invalid_argument("cost supports must be nonempty");
  validate_cost_spec(spec);
  CostMatrix c;
  c.n = static_cast<int>(src.size());
  c.m = static_cast<int>(dst.size());
  c.source_locations = src;
  c.target_locations = dst;
  c.costs.resize(static_cast<std::size_t>(c.n) * c.m);
  for (int i = 0; i < c.n; ++i)
    for (int j = 0; j < c.m; ++j) c.at(i, j) = point_cost(src[i], dst[j], spec);
  return c;
}

void validate_cost_matrix(const CostMatrix& c) {
  if (c.n <= 0 || c.m <= 0) throw std::invalid_argument("cost matrix must be nonempty");
  if (c.costs.size() != static_cast<std::size_t>(c.n) * c.m)
    throw std::invalid_argument("cost matrix storage does not match its dimensions");
  for (double v : c.costs)
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument("cost entries must be finite and nonnegative");
}

void validate_solver_config(const SolverConfig& cfg) {
  if (cfg.eps_schedule.empty()) throw std::invalid_argument("eps schedule must be nonempty");
  for (double e : cfg.eps_schedule)
    if (!(e > 0.0) || !std::isfinite(e)) throw std::invalid_argument("eps must be positive");
  if (cfg.max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  if (!(cfg.tol > 0.0)) throw std::invalid_argument("tol must be positive");
}

SolverConfig SolverConfig::accurate() { return SolverConfig{}; }

SolverConfig SolverConfig::training() {
  // One moderately regularized stage: warm starts carry the potentials
  // across training steps, so a handful of iterations per call suffices,
  // and the looser residual is far below what fixed-step descent on a
  // kinked objective can resolve anyway.
  SolverConfig cfg;
  cfg.eps_schedule = {5.0};
  cfg.max_iter = 2000;
  cfg.tol = 1e-3;
  return cfg;
}

namespace {

struct SinkhornState {
  const CostMatrix& c;
  const std::vector<double>& mu;
  const std::vector<double>& nu;
  std::vector<double> f, g;        // internal potentials (include eps*log marginal)
  std::vector<double> log_mu, log_nu;
  mutable std::vector<double> scratch;

  SinkhornState(const CostMatrix& cc, const std::vector<double>& m, const std::vector<double>& n)
      : c(cc), mu(m), nu(n) {
    f.assign(c.n, 0.0);
    g.assign(c.m, 0.0);
    log_mu.resize(c.n);
    log_nu.resize(c.m);
    for (int i = 0; i < c.n; ++i) log_mu[i] = mu[i] > 0.0 ? std::log(mu[i]) : -kInf;
    for (int j = 0; j < c.m; ++j) log_nu[j] = nu[j] > 0.0 ? std::log(nu[j]) : -kInf;
    scratch.resize(static_cast<std::size_t>(std::max(c.n, c.m)));
  }

  void update_f(double eps) {
    for (int i = 0; i < c.n; ++i) {
      if (log_mu[i] == -kInf) {
        f[i] = -kInf;
        continue;
      }
      for (int j = 0; j < c.m; ++j) scratch[j] = (g[j] - c.at(i, j)) / eps;
      f[i] = eps * (log_mu[i] - logsumexp(scratch.data(), c.m));
    }
  }

  void update_g(double eps) {
    for (int j = 0; j < c.m; ++j) {
      if (log_nu[j] == -kInf) {
        g[j] = -kInf;
        continue;
      }
      for (int i = 0; i < c.n; ++i) scratch[i] = (f[i] - c.at(i, j)) / eps;
      g[j] = eps * (log_nu[j] - logsumexp(scratch.data(), c.n));
    }
  }

  // After an f-update the row sums match mu exactly; the remaining error is
  // in the columns. Returns the L1 column residual.
  double column_residual(double eps) const {
    double err = 0.0;
    for (int j = 0; j < c.m; ++j) {
      double col = 0.0;
      for (int i = 0; i < c.n; ++i) {
        double e = (f[i] + g[j] - c.at(i, j)) / eps;
        if (e != -kInf) col += std::exp(e);
      }
      err += std::abs(col - nu[j]);
    }
    return err;
  }

  void fill_plan(double eps, TransportPlan& out) const {
    out.plan.assign(static_cast<std::size_t>(c.n) * c.m, 0.0);
    out.attained_cost = 0.0;
    for (int i = 0; i < c.n; ++i) {
      for (int j = 0; j < c.m; ++j) {
        double e = (f[i] + g[j] - c.at(i, j)) / eps;
        double t = e == -kInf ? 0.0 : std::exp(e);
        out.plan[static_cast<std::size_t>(i) * c.m + j] = t;
        out.attained_cost += t * c.at(i, j);
      }
    }
  }

  double attained_cost(double eps) const {
    double acc = 0.0;
    for (int i = 0; i < c.n; ++i)
      for (int j = 0; j < c.m; ++j) {
        double e = (f[i] + g[j] - c.at(i, j)) / eps;
        if (e != -kInf) acc += std::exp(e) * c.at(i, j);
      }
    return acc;
  }

  // Reported duals are the marginal-weighted c-transforms
  //   F_i = -eps*lse_j((g_j - C_ij)/eps),  G_j = -eps*lse_i((f_i - C_ij)/eps),
  // which at a converged fixed point equal the internal potentials minus
  // their eps*log(marginal) offset and approach an optimal LP dual pair as
  // eps shrinks. Zero-mass bins still get a finite service cost, which is
  // what loss gradients need at empty pixels.
  void report_duals(double eps, TransportPlan& out) const {
    out.dual_source.resize(c.n);
    out.dual_target.resize(c.m);
    for (int i = 0; i < c.n; ++i) {
      for (int j = 0; j < c.m; ++j) scratch[j] = (g[j] - c.at(i, j)) / eps;
      out.dual_source[i] = -eps * logsumexp(scratch.data(), c.m);
    }
    for (int j = 0; j < c.m; ++j) {
      for (int i = 0; i < c.n; ++i) scratch[i] = (f[i] - c.at(i, j)) / eps;
      out.dual_target[j] = -eps * logsumexp(scratch.data(), c.n);
    }
  }
};

int run_stage(SinkhornState& st, double eps, int max_iter, double tol, double& residual) {
  int it = 0;
  residual = kInf;
  while (it < max_iter) {
    st.update_g(eps);
    st.update_f(eps);
    ++it;
    residual = st.column_residual(eps);
    if (residual <= tol) break;
  }
  return it;
}

TransportPlan finish_plan(SinkhornState& st, double eps, double residual, int iterations,
                          double tol) {
  TransportPlan out;
  out.n = st.c.n;
  out.m = st.c.m;
  out.iterations = iterations;
  out.residual = residual;
  out.converged = residual <= tol;
  st.fill_plan(eps, out);
  st.report_duals(eps, out);
  return out;
}

}  // namespace

TransportPlan sinkhorn(const CostMatrix& c, const std::vector<double>& mu,
                       const std::vector<double>& nu, double eps, int max_iter, double tol,
                       DualCache* cache) {
  validate_cost_matrix(c);
  validate_marginals(c, mu, nu);
  if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("eps must be positive");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");

  SinkhornState st(c, mu, nu);
  if (cache && cache->valid && static_cast<int>(cache->f.size()) == c.n &&
      static_cast<int>(cache->g.size()) == c.m) {
    st.f = cache->f;
    st.g = cache->g;
  }
  double residual = kInf;
  int it = run_stage(st, eps, max_iter, tol, residual);
  TransportPlan out = finish_plan(st, eps, residual, it, tol);
  out.stage_costs = {out.attained_cost};
  if (cache) {
    cache->f = st.f;
    cache->g = st.g;
    cache->valid = true;
  }
  return out;
}

TransportPlan sinkhorn_annealed(const CostMatrix& c, const std::vector<double>& mu,
                                const std::vector<double>& nu, const SolverConfig& cfg,
                                DualCache* cache) {
  validate_cost_matrix(c);
  validate_marginals(c, mu, nu);
  validate_solver_config(cfg);

  SinkhornState st(c, mu, nu);
  if (cache && cache->valid && static_cast<int>(cache->f.size()) == c.n &&
      static_cast<int>(cache->g.size()) == c.m) {
    st.f = cache->f;
    st.g = cache->g;
  }
  std::vector<double> stage_costs;
  stage_costs.reserve(cfg.eps_schedule.size());
  int total_it = 0;
  double residual = kInf;
  for (double eps : cfg.eps_schedule) {
    total_it += run_stage(st, eps, cfg.max_iter, cfg.tol, residual);
    stage_costs.push_back(st.attained_cost(eps));
  }
  TransportPlan out = finish_plan(st, cfg.eps_schedule.back(), residual, total_it, cfg.tol);
  out.stage_costs = std::move(stage_costs);
  if (cache) {
    cache->f = st.f;
    cache->g = st.g;
    cache->valid = true;
  }
  return out;
}

void validate_instance(const OtInstance& inst) {
  if (inst.mu.empty() || inst.nu.empty()) throw std::invalid_argument("instance marginals empty");
  if (inst.src.size() != inst.mu.size() || inst.dst.size() != inst.nu.size())
    throw std::invalid_argument("instance support/marginal sizes mismatch");
  validate_cost_spec(inst.cost);
}

std::string instance_to_json(const OtInstance& inst) {
  validate_instance(inst);
  nlohmann::json j;
  j["mu"] = inst.mu;
  j["nu"] = inst.nu;
  j["src"] = nlohmann::json::array();
  for (const Point& p : inst.src) j["src"].push_back({p.x, p.y});
  j["dst"] = nlohmann::json::array();
  for (const Point& p : inst.dst) j["dst"].push_back({p.x, p.y});
  if (inst.cost.kind == CostKind::l2)
    j["cost"] = "l2";
  else
    j["cost"] = {{"correntropy", inst.cost.sigma}};
  return j.dump();
}

OtInstance instance_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  OtInstance inst;
  inst.mu = j.at("mu").get<std::vector<double>>();
  inst.nu = j.at("nu").get<std::vector<double>>();
  for (const auto& p : j.at("src")) {
    if (!p.is_array() || p.size() != 2) throw std::runtime_error("src point must be [x, y]");
    inst.src.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  for (const auto& p : j.at("dst")) {
    if (!p.is_array() || p.size() != 2) throw std::runtime_error("dst point must be [x, y]");
    inst.dst.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  const auto& cost = j.at("cost");
  if (cost.is_string() && cost.get<std::string>() == "l2") {
    inst.cost = CostSpec::l2();
  } else if (cost.is_object() && cost.contains("correntropy")) {
    inst.cost = CostSpec::correntropy(cost["correntropy"].get<double>());
  } else {
    throw std::runtime_error("cost must be \"l2\" or {\"correntropy\": sigma}");
  }
  validate_instance(inst);
  return inst;
}

}  // namespace ctas
