#pragma once

#include <vector>

#include "ctas/grid.hpp"

namespace ctas {

// Channel-major feature map: values[(c*height + y)*width + x].
struct ToyFeatureMap {
  int channels = 0, width = 0, height = 0;
  std::vector<double> values;

  static ToyFeatureMap zeros(int channels, int width, int height);

  double at(int c, int x, int y) const {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double& at(int c, int x, int y) {
    return values[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::size_t size() const { return values.size(); }
};

void validate_feature_map(const ToyFeatureMap& f);

// 2-D convolution with zero padding. weight is [out][in][ky][kx]; gradients
// accumulate in place so one buffer serves a whole training step.
struct Conv2d {
  int in_ch = 0, out_ch = 0, ksize = 1, stride = 1, dilation = 1, pad = 0;
  std::vector<double> weight, bias;
  std::vector<double> weight_grad, bias_grad;
};

// pad defaults to dilation*(ksize-1)/2 so stride-1 convs preserve dims.
Conv2d make_conv(int in_ch, int out_ch, int ksize, int stride = 1, int dilation = 1);
void validate_conv(const Conv2d& p);
int conv_out_dim(int in_dim, const Conv2d& p);

ToyFeatureMap conv_forward(const ToyFeatureMap& x, const Conv2d& p);
// Accumulates weight/bias gradients into p and returns the input gradient.
ToyFeatureMap conv_backward(const ToyFeatureMap& x, Conv2d& p, const ToyFeatureMap& grad_out);

ToyFeatureMap relu(const ToyFeatureMap& x);
ToyFeatureMap relu_backward(const ToyFeatureMap& pre, const ToyFeatureMap& grad_out);

double softplus(double x);
// Collapses a single-channel pre-activation map to a nonnegative density.
DensityGrid softplus_head(const ToyFeatureMap& pre);
ToyFeatureMap softplus_head_backward(const ToyFeatureMap& pre, const DensityGrid& grad_out);

// Per-channel bilinear resize of feature maps (align-corners-false).
ToyFeatureMap upsample_feature(const ToyFeatureMap& f, int out_w, int out_h);
ToyFeatureMap upsample_feature_adjoint(const ToyFeatureMap& grad_out, int in_w, int in_h);

ToyFeatureMap concat_channels(const ToyFeatureMap& a, const ToyFeatureMap& b);
void split_channels_backward(const ToyFeatureMap& grad_concat, ToyFeatureMap& grad_a,
                             ToyFeatureMap& grad_b);

// Bilinear resize of a density map rescaled by the pixel-count ratio, so a
// constant field keeps its total mass across resolutions.
DensityGrid resize_density(const DensityGrid& g, int out_w, int out_h);
DensityGrid resize_density_backward(const DensityGrid& grad_out, int in_w, int in_h);

// ---------------------------------------------------------------------------
// Transformer encoder pieces.

// Row-major token matrix: values[i*d + k].
struct TokenSequence {
  int n = 0, d = 0;
  std::vector<double> values;

  static TokenSequence zeros(int n, int d);

  double at(int i, int k) const { return values[static_cast<std::size_t>(i) * d + k]; }
  double& at(int i, int k) { return values[static_cast<std::size_t>(i) * d + k]; }
};

void validate_tokens(const TokenSequence& z);

// y = x W + b with W stored [in][out].
struct LinearParams {
  int in = 0, out = 0;
  std::vector<double> weight, bias;
  std::vector<double> weight_grad, bias_grad;
};

LinearParams make_linear(int in, int out);
TokenSequence linear_forward(const TokenSequence& x, const LinearParams& p);
TokenSequence linear_backward(const TokenSequence& x, LinearParams& p,
                              const TokenSequence& grad_out);

// Per-token normalization: mean 0, variance 1 (1/d convention, eps = 1e-5
// inside the root), then an elementwise affine.
struct LayerNormParams {
  int d = 0;
  std::vector<double> gain, bias;
  std::vector<double> gain_grad, bias_grad;
};

LayerNormParams make_layer_norm(int d);

struct LayerNormCache {
  std::vector<double> inv_std;  // per token
  TokenSequence normalized;     // pre-affine
};

TokenSequence layer_norm(const TokenSequence& z, const LayerNormParams& p);
TokenSequence layer_norm_forward(const TokenSequence& z, const LayerNormParams& p,
                                 LayerNormCache& cache);
TokenSequence layer_norm_backward(LayerNormParams& p, const LayerNormCache& cache,
                                  const TokenSequence& grad_out);

// One encoder layer: three projection matrices, head count, a d->4d->d
// feed-forward, and two layer norms. The 4d hidden width is asserted at
// construction and again on every validate call.
struct EncoderLayerParams {
  int d = 0, h = 0;
  std::vector<double> w_q, w_k, w_v;  // d x d, [in][out]
  std::vector<double> w_q_grad, w_k_grad, w_v_grad;
  LinearParams ffn1, ffn2;
  LayerNormParams ln1, ln2;
};

EncoderLayerParams make_encoder_layer(int d, int h);
void validate_encoder_layer(const EncoderLayerParams& p);

struct MhaCache {
  TokenSequence q, k, v;
  std::vector<double> attn;  // [head][i][j], h*n*n
  TokenSequence out;
};

// Multi-head attention: per-head softmax(Q Kt / sqrt(d/h)) V, heads
// concatenated; no output projection (only the three stated matrices).
TokenSequence mha(const TokenSequence& z, const EncoderLayerParams& p);
TokenSequence mha_forward(const TokenSequence& z, const EncoderLayerParams& p, MhaCache& cache);
TokenSequence mha_backward(const TokenSequence& z, EncoderLayerParams& p, const MhaCache& cache,
                           const TokenSequence& grad_out);

struct EncoderLayerCache {
  TokenSequence input;
  MhaCache mha;
  TokenSequence z_prime;  // mha out + input
  LayerNormCache ln1;
  TokenSequence a;        // ln1(z_prime)
  TokenSequence ffn_pre;  // a ffn1 + b, pre-relu
  TokenSequence ffn_act;
  TokenSequence ffn_out;
  TokenSequence sum2;     // ffn_out + a
  LayerNormCache ln2;
  TokenSequence output;
};

// Z' = MHA(Z) + Z; out = LN2(FFN(LN1(Z')) + LN1(Z')).
TokenSequence encoder_layer(const TokenSequence& z, const EncoderLayerParams& p);
TokenSequence encoder_layer_forward(const TokenSequence& z, const EncoderLayerParams& p,
                                    EncoderLayerCache& cache);
TokenSequence encoder_layer_backward(EncoderLayerParams& p, const EncoderLayerCache& cache,
                                     const TokenSequence& grad_out);

// Spatial flatten: token (y*width + x) carries the channel vector at (x, y).
TokenSequence flatten_tokens(const ToyFeatureMap& f);
ToyFeatureMap unflatten_tokens(const TokenSequence& z, int width, int height);

// ---------------------------------------------------------------------------
// ASPP: four parallel dilated 3x3 branches, concatenated, then 1x1-mixed
// back to the input channel count. Purely linear (no activations inside).

struct AsppParams {
  std::vector<int> rates;
  std::vector<Conv2d> branches;
  Conv2d mix;
};

// full_rates selects (1,6,12,18); the toy default is (1,2,3,4).
AsppParams make_aspp(int channels, bool full_rates);
void validate_aspp(const AsppParams& p, int width, int height);

struct AsppCache {
  std::vector<ToyFeatureMap> branch_out;
  ToyFeatureMap concat;
};

ToyFeatureMap aspp(const ToyFeatureMap& f5, const AsppParams& p);
ToyFeatureMap aspp_forward(const ToyFeatureMap& f5, const AsppParams& p, AsppCache& cache);
ToyFeatureMap aspp_backward(const ToyFeatureMap& f5, AsppParams& p, const AsppCache& cache,
                            const ToyFeatureMap& grad_out);

}  // namespace ctas
