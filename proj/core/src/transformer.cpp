#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ctas/nets.hpp"

namespace ctas {

namespace {

constexpr double kLnEps = 1e-5;

void require_same_shape(const TokenSequence& a, const TokenSequence& b, const char* what) {
  if (a.n != b.n || a.d != b.d) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

TokenSequence add_tokens(const TokenSequence& a, const TokenSequence& b) {
  TokenSequence out = a;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += b.values[i];
  return out;
}

}  // namespace

TokenSequence TokenSequence::zeros(int n, int d) {
  TokenSequence z;
  z.n = n;
  z.d = d;
  z.values.assign(static_cast<std::size_t>(n) * d, 0.0);
  return z;
}

void validate_tokens(const TokenSequence& z) {
  if (z.n <= 0 || z.d <= 0 || z.values.size() != static_cast<std::size_t>(z.n) * z.d)
    throw std::invalid_argument("token sequence storage does not match its dimensions");
  for (double v : z.values)
    if (!std::isfinite(v)) throw std::invalid_argument("token values must be finite");
}

LinearParams make_linear(int in, int out) {
  if (in < 1 || out < 1) throw std::invalid_argument("linear dimensions must be positive");
  LinearParams p;
  p.in = in;
  p.out = out;
  p.weight.assign(static_cast<std::size_t>(in) * out, 0.0);
  p.weight_grad.assign(p.weight.size(), 0.0);
  p.bias.assign(out, 0.0);
  p.bias_grad.assign(out, 0.0);
  return p;
}

TokenSequence linear_forward(const TokenSequence& x, const LinearParams& p) {
  if (x.d != p.in) throw std::invalid_argument("linear input width mismatch");
  TokenSequence y = TokenSequence::zeros(x.n, p.out);
  for (int i = 0; i < x.n; ++i) {
    for (int o = 0; o < p.out; ++o) {
      double acc = p.bias[o];
      for (int k = 0; k < p.in; ++k) acc += x.at(i, k) * p.weight[static_cast<std::size_t>(k) * p.out + o];
      y.at(i, o) = acc;
    }
  }
  return y;
}

TokenSequence linear_backward(const TokenSequence& x, LinearParams& p,
                              const TokenSequence& grad_out) {
  if (x.d != p.in || grad_out.d != p.out || grad_out.n != x.n)
    throw std::invalid_argument("linear gradient shape mismatch");
  TokenSequence gx = TokenSequence::zeros(x.n, p.in);
  for (int i = 0; i < x.n; ++i) {
    for (int o = 0; o < p.out; ++o) {
      double g = grad_out.at(i, o);
      p.bias_grad[o] += g;
      for (int k = 0; k < p.in; ++k) {
        p.weight_grad[static_cast<std::size_t>(k) * p.out + o] += g * x.at(i, k);
        gx.at(i, k) += g * p.weight[static_cast<std::size_t>(k) * p.out + o];
      }
    }
  }
  return gx;
}

LayerNormParams make_layer_norm(int d) {
  if (d < 2) throw std::invalid_argument("layer norm needs d >= 2");
  LayerNormParams p;
  p.d = d;
  p.gain.assign(d, 1.0);
  p.gain_grad.assign(d, 0.0);
  p.bias.assign(d, 0.0);
  p.bias_grad.assign(d, 0.0);
  return p;
}

TokenSequence layer_norm_forward(const TokenSequence& z, const LayerNormParams& p,
                                 LayerNormCache& cache) {
  if (z.d != p.d) throw std::invalid_argument("layer norm width mismatch");
  if (z.d < 2) throw std::invalid_argument("layer norm needs d >= 2");
  cache.inv_std.assign(z.n, 0.0);
  cache.normalized = TokenSequence::zeros(z.n, z.d);
  TokenSequence out = TokenSequence::zeros(z.n, z.d);
  for (int i = 0; i < z.n; ++i) {
    double mean = 0.0;
    for (int k = 0; k < z.d; ++k) mean += z.at(i, k);
    mean /= z.d;
    double var = 0.0;
    for (int k = 0; k < z.d; ++k) {
      double c = z.at(i, k) - mean;
      var += c * c;
    }
    var /= z.d;
    double inv_std = 1.0 / std::sqrt(var + kLnEps);
    cache.inv_std[i] = inv_std;
    for (int k = 0; k < z.d; ++k) {
      double nrm = (z.at(i, k) - mean) * inv_std;
      cache.normalized.at(i, k) = nrm;
      out.at(i, k) = p.gain[k] * nrm + p.bias[k];
    }
  }
  return out;
}

TokenSequence layer_norm(const TokenSequence& z, const LayerNormParams& p) {
  LayerNormCache cache;
  return layer_norm_forward(z, p, cache);
}

TokenSequence layer_norm_backward(LayerNormParams& p, const LayerNormCache& cache,
                                  const TokenSequence& grad_out) {
  const TokenSequence& nrm = cache.normalized;
  require_same_shape(nrm, grad_out, "layer_norm_backward");
  TokenSequence gx = TokenSequence::zeros(nrm.n, nrm.d);
  int d = nrm.d;
  for (int i = 0; i < nrm.n; ++i) {
    double sum_g = 0.0, sum_gn = 0.0;
    for (int k = 0; k < d; ++k) {
      double g = grad_out.at(i, k) * p.gain[k];  // grad wrt normalized value
      sum_g += g;
      sum_gn += g * nrm.at(i, k);
      p.gain_grad[k] += grad_out.at(i, k) * nrm.at(i, k);
      p.bias_grad[k] += grad_out.at(i, k);
    }
    for (int k = 0; k < d; ++k) {
      double g = grad_out.at(i, k) * p.gain[k];
      gx.at(i, k) = cache.inv_std[i] * (g - sum_g / d - nrm.at(i, k) * sum_gn / d);
    }
  }
  return gx;
}

EncoderLayerParams make_encoder_layer(int d, int h) {
  if (d < 2 || h < 1 || d % h != 0)
    throw std::invalid_argument("encoder layer needs d >= 2 divisible by the head count");
  EncoderLayerParams p;
  p.d = d;
  p.h = h;
  std::size_t dd = static_cast<std::size_t>(d) * d;
  p.w_q.assign(dd, 0.0);
  p.w_k.assign(dd, 0.0);
  p.w_v.assign(dd, 0.0);
  p.w_q_grad.assign(dd, 0.0);
  p.w_k_grad.assign(dd, 0.0);
  p.w_v_grad.assign(dd, 0.0);
  p.ffn1 = make_linear(d, 4 * d);
  p.ffn2 = make_linear(4 * d, d);
  p.ln1 = make_layer_norm(d);
  p.ln2 = make_layer_norm(d);
  validate_encoder_layer(p);
  return p;
}

void validate_encoder_layer(const EncoderLayerParams& p) {
  if (p.d < 2 || p.h < 1 || p.d % p.h != 0)
    throw std::invalid_argument("encoder layer needs d >= 2 divisible by the head count");
  if (p.ffn1.in != p.d || p.ffn1.out != 4 * p.d || p.ffn2.in != 4 * p.d || p.ffn2.out != p.d)
    throw std::invalid_argument("feed-forward must expand d to exactly 4d and back");
  std::size_t dd = static_cast<std::size_t>(p.d) * p.d;
  if (p.w_q.size() != dd || p.w_k.size() != dd || p.w_v.size() != dd)
    throw std::invalid_argument("projection matrices must be d x d");
  if (p.ln1.d != p.d || p.ln2.d != p.d)
    throw std::invalid_argument("layer norm width must match d");
}

namespace {

// Plain d x d projection (no bias), W stored [in][out].
TokenSequence project(const TokenSequence& z, const std::vector<double>& w) {
  TokenSequence y = TokenSequence::zeros(z.n, z.d);
  for (int i = 0; i < z.n; ++i)
    for (int o = 0; o < z.d; ++o) {
      double acc = 0.0;
      for (int k = 0; k < z.d; ++k) acc += z.at(i, k) * w[static_cast<std::size_t>(k) * z.d + o];
      y.at(i, o) = acc;
    }
  return y;
}

void project_backward(const TokenSequence& z, const std::vector<double>& w,
                      std::vector<double>& w_grad, const TokenSequence& grad_out,
                      TokenSequence& grad_z) {
  for (int i = 0; i < z.n; ++i)
    for (int o = 0; o < z.d; ++o) {
      double g = grad_out.at(i, o);
      if (g == 0.0) continue;
      for (int k = 0; k < z.d; ++k) {
        w_grad[static_cast<std::size_t>(k) * z.d + o] += g * z.at(i, k);
        grad_z.at(i, k) += g * w[static_cast<std::size_t>(k) * z.d + o];
      }
    }
}

}  // namespace

TokenSequence mha_forward(const TokenSequence& z, const EncoderLayerParams& p, MhaCache& cache) {
  validate_tokens(z);
  validate_encoder_layer(p);
  if (z.d != p.d) throw std::invalid_argument("token width must match the layer's d");

  int n = z.n, dh = p.d / p.h;
  double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  cache.q = project(z, p.w_q);
  cache.k = project(z, p.w_k);
  cache.v = project(z, p.w_v);
  cache.attn.assign(static_cast<std::size_t>(p.h) * n * n, 0.0);
  cache.out = TokenSequence::zeros(n, p.d);

  std::vector<double> scores(n);
  for (int head = 0; head < p.h; ++head) {
    int c0 = head * dh;
    for (int i = 0; i < n; ++i) {
      double hi = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < dh; ++k) s += cache.q.at(i, c0 + k) * cache.k.at(j, c0 + k);
        scores[j] = s * scale;
        hi = std::max(hi, scores[j]);
      }
      double denom = 0.0;
      for (int j = 0; j < n; ++j) {
        scores[j] = std::exp(scores[j] - hi);
        denom += scores[j];
      }
      double* row = &cache.attn[(static_cast<std::size_t>(head) * n + i) * n];
      for (int j = 0; j < n; ++j) {
        row[j] = scores[j] / denom;
        for (int k = 0; k < dh; ++k) cache.out.at(i, c0 + k) += row[j] * cache.v.at(j, c0 + k);
      }
    }
  }
  return cache.out;
}

TokenSequence mha(const TokenSequence& z, const EncoderLayerParams& p) {
  MhaCache cache;
  return mha_forward(z, p, cache);
}

TokenSequence mha_backward(const TokenSequence& z, EncoderLayerParams& p, const MhaCache& cache,
                           const TokenSequence& grad_out) {
  require_same_shape(cache.out, grad_out, "mha_backward");
  int n = z.n, dh = p.d / p.h;
  double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  TokenSequence gq = TokenSequence::zeros(n, p.d);
  TokenSequence gk = TokenSequence::zeros(n, p.d);
  TokenSequence gv = TokenSequence::zeros(n, p.d);

  std::vector<double> ga(n);
  for (int head = 0; head < p.h; ++head) {
    int c0 = head * dh;
    for (int i = 0; i < n; ++i) {
      const double* row = &cache.attn[(static_cast<std::size_t>(head) * n + i) * n];
      // Gradient into the attention row, plus the V term.
      double dot = 0.0;
      for (int j = 0; j < n; ++j) {
        double g = 0.0;
        for (int k = 0; k < dh; ++k) {
          g += grad_out.at(i, c0 + k) * cache.v.at(j, c0 + k);
          gv.at(j, c0 + k) += row[j] * grad_out.at(i, c0 + k);
        }
        ga[j] = g;
        dot += g * row[j];
      }
      // Softmax backward: ds_j = a_j * (ga_j - sum_k a_k ga_k).
      for (int j = 0; j < n; ++j) {
        double ds = row[j] * (ga[j] - dot) * scale;
        if (ds == 0.0) continue;
        for (int k = 0; k < dh; ++k) {
          gq.at(i, c0 + k) += ds * cache.k.at(j, c0 + k);
          gk.at(j, c0 + k) += ds * cache.q.at(i, c0 + k);
        }
      }
    }
  }

  TokenSequence gz = TokenSequence::zeros(n, p.d);
  project_backward(z, p.w_q, p.w_q_grad, gq, gz);
  project_backward(z, p.w_k, p.w_k_grad, gk, gz);
  project_backward(z, p.w_v, p.w_v_grad, gv, gz);
  return gz;
}

TokenSequence encoder_layer_forward(const TokenSequence& z, const EncoderLayerParams& p,
                                    EncoderLayerCache& cache) {
  cache.input = z;
  TokenSequence attn = mha_forward(z, p, cache.mha);
  cache.z_prime = add_tokens(attn, z);
  cache.a = layer_norm_forward(cache.z_prime, p.ln1, cache.ln1);
  cache.ffn_pre = linear_forward(cache.a, p.ffn1);
  cache.ffn_act = cache.ffn_pre;
  for (double& v : cache.ffn_act.values) v = v > 0.0 ? v : 0.0;
  cache.ffn_out = linear_forward(cache.ffn_act, p.ffn2);
  cache.sum2 = add_tokens(cache.ffn_out, cache.a);
  cache.output = layer_norm_forward(cache.sum2, p.ln2, cache.ln2);
  return cache.output;
}

TokenSequence encoder_layer(const TokenSequence& z, const EncoderLayerParams& p) {
  EncoderLayerCache cache;
  return encoder_layer_forward(z, p, cache);
}

TokenSequence encoder_layer_backward(EncoderLayerParams& p, const EncoderLayerCache& cache,
                                     const TokenSequence& grad_out) {
  TokenSequence g_sum2 = layer_norm_backward(p.ln2, cache.ln2, grad_out);
  // sum2 = ffn_out + a
  TokenSequence g_ffn_act = linear_backward(cache.ffn_act, p.ffn2, g_sum2);
  for (std::size_t i = 0; i < g_ffn_act.values.size(); ++i)
    if (cache.ffn_pre.values[i] <= 0.0) g_ffn_act.values[i] = 0.0;
  TokenSequence g_a = linear_backward(cache.a, p.ffn1, g_ffn_act);
  for (std::size_t i = 0; i < g_a.values.size(); ++i) g_a.values[i] += g_sum2.values[i];
  TokenSequence g_zprime = layer_norm_backward(p.ln1, cache.ln1, g_a);
  // z' = mha(z) + z
  TokenSequence g_z = mha_backward(cache.input, p, cache.mha, g_zprime);
  for (std::size_t i = 0; i < g_z.values.size(); ++i) g_z.values[i] += g_zprime.values[i];
  return g_z;
}

TokenSequence flatten_tokens(const ToyFeatureMap& f) {
  validate_feature_map(f);
  TokenSequence z = TokenSequence::zeros(f.width * f.height, f.channels);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x)
      for (int c = 0; c < f.channels; ++c) z.at(y * f.width + x, c) = f.at(c, x, y);
  return z;
}

ToyFeatureMap unflatten_tokens(const TokenSequence& z, int width, int height) {
  validate_tokens(z);
  if (z.n != width * height) throw std::invalid_argument("token count must equal width*height");
  ToyFeatureMap f = ToyFeatureMap::zeros(z.d, width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < z.d; ++c) f.at(c, x, y) = z.at(y * width + x, c);
  return f;
}

AsppParams make_aspp(int channels, bool full_rates) {
  if (channels < 1) throw std::invalid_argument("aspp needs at least one channel");
  AsppParams p;
  p.rates = full_rates ? std::vector<int>{1, 6, 12, 18} : std::vector<int>{1, 2, 3, 4};
  for (int r : p.rates) p.branches.push_back(make_conv(channels, channels, 3, 1, r));
  p.mix = make_conv(channels * 4, channels, 1);
  return p;
}

void validate_aspp(const AsppParams& p, int width, int height) {
  if (p.branches.size() != 4 || p.rates.size() != 4)
    throw std::invalid_argument("aspp needs exactly four dilated branches");
  for (int r : p.rates)
    if (r > width || r > height)
      throw std::invalid_argument("aspp dilation exceeds the feature map's spatial extent");
}

ToyFeatureMap aspp_forward(const ToyFeatureMap& f5, const AsppParams& p, AsppCache& cache) {
  validate_feature_map(f5);
  validate_aspp(p, f5.width, f5.height);
  cache.branch_out.clear();
  for (const Conv2d& conv : p.branches) cache.branch_out.push_back(conv_forward(f5, conv));
  cache.concat = cache.branch_out[0];
  for (std::size_t b = 1; b < cache.branch_out.size(); ++b)
    cache.concat = concat_channels(cache.concat, cache.branch_out[b]);
  return conv_forward(cache.concat, p.mix);
}

ToyFeatureMap aspp(const ToyFeatureMap& f5, const AsppParams& p) {
  AsppCache cache;
  return aspp_forward(f5, p, cache);
}

ToyFeatureMap aspp_backward(const ToyFeatureMap& f5, AsppParams& p, const AsppCache& cache,
                            const ToyFeatureMap& grad_out) {
  if (cache.branch_out.size() != 4) throw std::invalid_argument("aspp backward needs a cache");
  ToyFeatureMap g_concat = conv_backward(cache.concat, p.mix, grad_out);
  ToyFeatureMap gx = ToyFeatureMap::zeros(f5.channels, f5.width, f5.height);
  int per = f5.channels;
  for (int b = 0; b < 4; ++b) {
    ToyFeatureMap g_branch = ToyFeatureMap::zeros(per, f5.width, f5.height);
    std::size_t plane = static_cast<std::size_t>(f5.width) * f5.height;
    std::copy_n(g_concat.values.begin() + static_cast<std::ptrdiff_t>(b * per * plane),
                static_cast<std::ptrdiff_t>(per * plane), g_branch.values.begin());
    ToyFeatureMap g_in = conv_backward(f5, p.branches[b], g_branch);
    for (std::size_t i = 0; i < gx.values.size(); ++i) gx.values[i] += g_in.values[i];
  }
  return gx;
}

}  // namespace ctas
