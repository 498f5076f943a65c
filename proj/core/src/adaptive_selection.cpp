#include "ctas/adaptive_selection.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace ctas {

namespace {

void require_shape(int w0, int h0, int w1, int h1, const char* what) {
  if (w0 != w1 || h0 != h1) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

void validate_branch_params(const AsmBranchParams& p) {
  if (!std::isfinite(p.w1) || !std::isfinite(p.b1) || !std::isfinite(p.w2) ||
      !std::isfinite(p.b2))
    throw std::invalid_argument("selection parameters must be finite");
  if (p.k < 1) throw std::invalid_argument("block count k must be >= 1");
}

nlohmann::json branch_to_json(const AsmBranchParams& p, const char* name) {
  return {{"branch", name}, {"w1", p.w1}, {"b1", p.b1}, {"w2", p.w2}, {"b2", p.b2}, {"k", p.k}};
}

AsmBranchParams branch_from_json(const nlohmann::json& j) {
  AsmBranchParams p;
  p.w1 = j.at("w1").get<double>();
  p.b1 = j.at("b1").get<double>();
  p.w2 = j.at("w2").get<double>();
  p.b2 = j.at("b2").get<double>();
  p.k = j.at("k").get<int>();
  validate_branch_params(p);
  return p;
}

}  // namespace

void validate_asm_params(const AsmParams& p) {
  validate_branch_params(p.t);
  validate_branch_params(p.c);
}

void validate_attention(const AttentionMap& a) {
  if (a.width <= 0 || a.height <= 0 ||
      a.values.size() != static_cast<std::size_t>(a.width) * a.height)
    throw std::invalid_argument("attention map storage does not match its dimensions");
  for (double v : a.values)
    if (!(v > 0.0) || !(v < 1.0))
      throw std::invalid_argument("attention values must lie strictly in (0, 1)");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

AsmBranchOutputs asm_branch(const DensityGrid& d, const AsmBranchParams& p) {
  validate_grid(d);
  validate_branch_params(p);

  BlockGrid pooled = block_average_pool(d, p.k);
  BlockGrid mixed = pooled;
  for (double& v : mixed.block_values) v = p.w1 * v + p.b1;

  AsmBranchOutputs out;
  out.d_b = upsample_blocks(mixed, d.width, d.height);
  out.d_at.width = d.width;
  out.d_at.height = d.height;
  out.d_at.values.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    out.d_at.values[i] = sigmoid(p.w2 * out.d_b.values[i] + p.b2);
  return out;
}

AttentionMap final_attention(const DensityGrid& d_b, const AttentionMap& d_at) {
  require_shape(d_b.width, d_b.height, d_at.width, d_at.height, "final_attention");
  AttentionMap a;
  a.width = d_b.width;
  a.height = d_b.height;
  a.values.resize(d_b.size());
  for (std::size_t i = 0; i < d_b.size(); ++i)
    a.values[i] = sigmoid(d_b.values[i] * d_at.values[i]);
  return a;
}

DensityGrid fuse(const DensityGrid& d_t, const DensityGrid& d_c, const AttentionMap& a_att,
                 const AttentionMap& a_atc) {
  require_shape(d_t.width, d_t.height, d_c.width, d_c.height, "fuse");
  require_shape(d_t.width, d_t.height, a_att.width, a_att.height, "fuse");
  require_shape(d_t.width, d_t.height, a_atc.width, a_atc.height, "fuse");
  DensityGrid out = DensityGrid::zeros(d_t.width, d_t.height);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.values[i] = a_att.values[i] * d_t.values[i] + (1.0 - a_atc.values[i]) * d_c.values[i];
  return out;
}

AsmForward asm_forward(const DensityGrid& d_t, const DensityGrid& d_c, const AsmParams& p) {
  require_shape(d_t.width, d_t.height, d_c.width, d_c.height, "asm_forward");
  validate_asm_params(p);

  AsmForward fwd;
  fwd.d_t = d_t;
  fwd.d_c = d_c;

  auto run_branch = [](const DensityGrid& d, const AsmBranchParams& bp) {
    AsmForward::Branch br;
    br.pooled = block_average_pool(d, bp.k);
    br.mixed = br.pooled;
    for (double& v : br.mixed.block_values) v = bp.w1 * v + bp.b1;
    br.d_b = upsample_blocks(br.mixed, d.width, d.height);
    br.d_at.width = d.width;
    br.d_at.height = d.height;
    br.d_at.values.resize(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
      br.d_at.values[i] = sigmoid(bp.w2 * br.d_b.values[i] + bp.b2);
    br.attention = final_attention(br.d_b, br.d_at);
    return br;
  };
  fwd.t = run_branch(d_t, p.t);
  fwd.c = run_branch(d_c, p.c);
  fwd.fused = fuse(d_t, d_c, fwd.t.attention, fwd.c.attention);
  fwd.cached = true;
  return fwd;
}

namespace {

// Reverse-mode through one branch given dL/dA for its final attention map.
// Returns the pooling-path gradient contribution to the branch input.
DensityGrid branch_backward(const DensityGrid& input, const AsmForward::Branch& br,
                            const AsmBranchParams& p, const std::vector<double>& grad_attention,
                            AsmBranchGrads& grads) {
  std::size_t count = input.size();
  // sigmoid(d_b * d_at) gate.
  std::vector<double> grad_db(count, 0.0), grad_dat(count);
  for (std::size_t i = 0; i < count; ++i) {
    double a = br.attention.values[i];
    double g_u = grad_attention[i] * a * (1.0 - a);
    grad_db[i] = g_u * br.d_at.values[i];
    grad_dat[i] = g_u * br.d_b.values[i];
  }
  // d_at = sigmoid(w2 * d_b + b2).
  for (std::size_t i = 0; i < count; ++i) {
    double s = br.d_at.values[i];
    double g_u = grad_dat[i] * s * (1.0 - s);
    grads.w2 += g_u * br.d_b.values[i];
    grads.b2 += g_u;
    grad_db[i] += g_u * p.w2;
  }
  // d_b = upsample(w1 * pooled + b1).
  DensityGrid grad_db_grid = DensityGrid::zeros(input.width, input.height);
  grad_db_grid.values = grad_db;
  BlockGrid grad_mixed = bilinear_upsample_adjoint_blocks(grad_db_grid, p.k);
  DensityGrid grad_input = DensityGrid::zeros(input.width, input.height);
  BlockGrid grad_pooled = grad_mixed;
  for (int b = 0; b < p.k * p.k; ++b) {
    grads.w1 += grad_mixed.block_values[b] * br.pooled.block_values[b];
    grads.b1 += grad_mixed.block_values[b];
    grad_pooled.block_values[b] = grad_mixed.block_values[b] * p.w1;
  }
  return block_pool_adjoint(grad_pooled, input.width, input.height);
}

}  // namespace

AsmGradients asm_backward(const DensityGrid& upstream, const AsmForward& cache,
                          const AsmParams& p) {
  if (!cache.cached) throw std::invalid_argument("asm_backward needs a forward cache");
  require_shape(upstream.width, upstream.height, cache.d_t.width, cache.d_t.height,
                "asm_backward");

  std::size_t count = upstream.size();
  AsmGradients out;
  out.wrt_d_t = DensityGrid::zeros(upstream.width, upstream.height);
  out.wrt_d_c = DensityGrid::zeros(upstream.width, upstream.height);

  // Direct fusion terms and the gradients reaching each attention map.
  std::vector<double> grad_att_t(count), grad_att_c(count);
  for (std::size_t i = 0; i < count; ++i) {
    double g = upstream.values[i];
    out.wrt_d_t.values[i] = g * cache.t.attention.values[i];
    out.wrt_d_c.values[i] = g * (1.0 - cache.c.attention.values[i]);
    grad_att_t[i] = g * cache.d_t.values[i];
    grad_att_c[i] = -g * cache.d_c.values[i];
  }

  DensityGrid pool_t = branch_backward(cache.d_t, cache.t, p.t, grad_att_t, out.t);
  DensityGrid pool_c = branch_backward(cache.d_c, cache.c, p.c, grad_att_c, out.c);
  for (std::size_t i = 0; i < count; ++i) {
    out.wrt_d_t.values[i] += pool_t.values[i];
    out.wrt_d_c.values[i] += pool_c.values[i];
  }
  return out;
}

std::string fusion_mode_name(FusionMode mode) {
  switch (mode) {
    case FusionMode::cnn_only: return "cnn_only";
    case FusionMode::transformer_only: return "transformer_only";
    case FusionMode::concat: return "concat";
    case FusionMode::adaptive: return "asm";
  }
  throw std::logic_error("unknown fusion mode");
}

FusionMode fusion_mode_from_name(const std::string& name) {
  if (name == "cnn_only") return FusionMode::cnn_only;
  if (name == "transformer_only") return FusionMode::transformer_only;
  if (name == "concat") return FusionMode::concat;
  if (name == "asm") return FusionMode::adaptive;
  throw std::invalid_argument("unknown fusion mode: " + name);
}

std::string asm_params_to_json(const AsmParams& p) {
  validate_asm_params(p);
  nlohmann::json j = nlohmann::json::array();
  j.push_back(branch_to_json(p.t, "t"));
  j.push_back(branch_to_json(p.c, "c"));
  return j.dump();
}

AsmParams asm_params_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  if (!j.is_array() || j.size() != 2)
    throw std::runtime_error("selection params JSON must hold one entry per branch");
  AsmParams p;
  bool have_t = false, have_c = false;
  for (const auto& item : j) {
    std::string branch = item.at("branch").get<std::string>();
    if (branch == "t") {
      p.t = branch_from_json(item);
      have_t = true;
    } else if (branch == "c") {
      p.c = branch_from_json(item);
      have_c = true;
    } else {
      throw std::runtime_error("branch must be \"t\" or \"c\"");
    }
  }
  if (!have_t || !have_c) throw std::runtime_error("selection params JSON missing a branch");
  return p;
}

}  // namespace ctas
