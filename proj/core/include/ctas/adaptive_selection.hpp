#pragma once

#include <string>

#include "ctas/grid.hpp"

namespace ctas {

// Per-branch selection parameters: a 1x1 mixing map on the pooled block
// density (w1, b1), a 1x1 map feeding the sigmoid gate (w2, b2), and the
// pooling block count k. On a single-channel density map a 1x1 convolution
// is exactly a per-pixel affine map.
struct AsmBranchParams {
  double w1 = 1.0;
  double b1 = 0.0;
  double w2 = 1.0;
  double b2 = 0.0;
  int k = 6;
};

struct AsmParams {
  AsmBranchParams t;  // transformer branch
  AsmBranchParams c;  // cnn branch
};

void validate_asm_params(const AsmParams& p);

// Sigmoid-normalized per-pixel attention; every value lies strictly in (0,1).
struct AttentionMap {
  int width = 0, height = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
};

void validate_attention(const AttentionMap& a);

double sigmoid(double x);

struct AsmBranchOutputs {
  DensityGrid d_b;     // upsampled, affine-mixed block density field
  AttentionMap d_at;   // sigmoid(w2 * d_b + b2)
};

// Block-pool the density map, mix it with (w1, b1), upsample back to the
// input shape, then gate with a sigmoid of the (w2, b2) mix.
AsmBranchOutputs asm_branch(const DensityGrid& d, const AsmBranchParams& p);

// sigmoid(d_b * d_at), elementwise.
AttentionMap final_attention(const DensityGrid& d_b, const AttentionMap& d_at);

// zhat = a_att * d_t + (1 - a_atc) * d_c, elementwise.
DensityGrid fuse(const DensityGrid& d_t, const DensityGrid& d_c, const AttentionMap& a_att,
                 const AttentionMap& a_atc);

// Forward cache for exact reverse-mode differentiation.
struct AsmForward {
  struct Branch {
    BlockGrid pooled;       // block means of the input density
    BlockGrid mixed;        // w1 * pooled + b1
    DensityGrid d_b;        // mixed, bilinearly upsampled
    AttentionMap d_at;      // sigmoid(w2 * d_b + b2)
    AttentionMap attention; // sigmoid(d_b * d_at)
  };
  DensityGrid d_t, d_c;
  Branch t, c;
  DensityGrid fused;
  bool cached = false;
};

AsmForward asm_forward(const DensityGrid& d_t, const DensityGrid& d_c, const AsmParams& p);

struct AsmBranchGrads {
  double w1 = 0.0, b1 = 0.0, w2 = 0.0, b2 = 0.0;
};

struct AsmGradients {
  DensityGrid wrt_d_t, wrt_d_c;
  AsmBranchGrads t, c;
};

// Exact reverse-mode derivatives through pooling (uniform spread), the
// affine mixes, upsampling (adjoint scatter), both sigmoids, and the fusion.
AsmGradients asm_backward(const DensityGrid& upstream, const AsmForward& cache,
                          const AsmParams& p);

// Ablation-level fusion selector. concat bypasses the selection module with
// the plain average 0.5 * (d_t + d_c).
enum class FusionMode { cnn_only, transformer_only, concat, adaptive };

std::string fusion_mode_name(FusionMode mode);
FusionMode fusion_mode_from_name(const std::string& name);

std::string asm_params_to_json(const AsmParams& p);
AsmParams asm_params_from_json(const std::string& json_text);

}  // namespace ctas
