#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctas/nets.hpp"

namespace ctas {

ToyFeatureMap ToyFeatureMap::zeros(int channels, int width, int height) {
  ToyFeatureMap f;
  f.channels = channels;
  f.width = width;
  f.height = height;
  f.values.assign(static_cast<std::size_t>(channels) * width * height, 0.0);
  return f;
}

void validate_feature_map(const ToyFeatureMap& f) {
  if (f.channels <= 0 || f.width <= 0 || f.height <= 0)
    throw std::invalid_argument("feature map dimensions must be positive");
  if (f.values.size() != static_cast<std::size_t>(f.channels) * f.width * f.height)
    throw std::invalid_argument("feature map storage does not match its dimensions");
  for (double v : f.values)
    if (!std::isfinite(v)) throw std::invalid_argument("feature map values must be finite");
}

Conv2d make_conv(int in_ch, int out_ch, int ksize, int stride, int dilation) {
  if (in_ch < 1 || out_ch < 1 || ksize < 1 || stride < 1 || dilation < 1)
    throw std::invalid_argument("conv dimensions must be positive");
  Conv2d p;
  p.in_ch = in_ch;
  p.out_ch = out_ch;
  p.ksize = ksize;
  p.stride = stride;
  p.dilation = dilation;
  p.pad = dilation * (ksize - 1) / 2;
  std::size_t wcount = static_cast<std::size_t>(out_ch) * in_ch * ksize * ksize;
  p.weight.assign(wcount, 0.0);
  p.weight_grad.assign(wcount, 0.0);
  p.bias.assign(out_ch, 0.0);
  p.bias_grad.assign(out_ch, 0.0);
  return p;
}

void validate_conv(const Conv2d& p) {
  std::size_t wcount = static_cast<std::size_t>(p.out_ch) * p.in_ch * p.ksize * p.ksize;
  if (p.in_ch < 1 || p.out_ch < 1 || p.ksize < 1 || p.stride < 1 || p.dilation < 1 || p.pad < 0 ||
      p.weight.size() != wcount || p.bias.size() != static_cast<std::size_t>(p.out_ch))
    throw std::invalid_argument("malformed conv parameters");
}

int conv_out_dim(int in_dim, const Conv2d& p) {
  int span = p.dilation * (p.ksize - 1) + 1;
  int padded = in_dim + 2 * p.pad;
  if (padded < span) throw std::invalid_argument("conv kernel span exceeds padded input");
  return (padded - span) / p.stride + 1;
}

namespace {

inline std::size_t widx(const Conv2d& p, int oc, int ic, int ky, int kx) {
  return ((static_cast<std::size_t>(oc) * p.in_ch + ic) * p.ksize + ky) * p.ksize + kx;
}

}  // namespace

ToyFeatureMap conv_forward(const ToyFeatureMap& x, const Conv2d& p) {
  validate_feature_map(x);
  validate_conv(p);
  if (x.channels != p.in_ch) throw std::invalid_argument("conv input channel mismatch");

  int ow = conv_out_dim(x.width, p), oh = conv_out_dim(x.height, p);
  ToyFeatureMap y = ToyFeatureMap::zeros(p.out_ch, ow, oh);
  for (int oc = 0; oc < p.out_ch; ++oc) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = p.bias[oc];
        int base_y = oy * p.stride - p.pad;
        int base_x = ox * p.stride - p.pad;
        for (int ic = 0; ic < p.in_ch; ++ic) {
          for (int ky = 0; ky < p.ksize; ++ky) {
            int iy = base_y + ky * p.dilation;
            if (iy < 0 || iy >= x.height) continue;
            for (int kx = 0; kx < p.ksize; ++kx) {
              int ix = base_x + kx * p.dilation;
              if (ix < 0 || ix >= x.width) continue;
              acc += p.weight[widx(p, oc, ic, ky, kx)] * x.at(ic, ix, iy);
            }
          }
        }
        y.at(oc, ox, oy) = acc;
      }
    }
  }
  return y;
}

ToyFeatureMap conv_backward(const ToyFeatureMap& x, Conv2d& p, const ToyFeatureMap& grad_out) {
  validate_feature_map(x);
  validate_conv(p);
  if (x.channels != p.in_ch) throw std::invalid_argument("conv input channel mismatch");
  int ow = conv_out_dim(x.width, p), oh = conv_out_dim(x.height, p);
  if (grad_out.channels != p.out_ch || grad_out.width != ow || grad_out.height != oh)
    throw std::invalid_argument("conv upstream gradient shape mismatch");

  ToyFeatureMap gx = ToyFeatureMap::zeros(x.channels, x.width, x.height);
  for (int oc = 0; oc < p.out_ch; ++oc) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double g = grad_out.at(oc, ox, oy);
        if (g == 0.0) continue;
        p.bias_grad[oc] += g;
        int base_y = oy * p.stride - p.pad;
        int base_x = ox * p.stride - p.pad;
        for (int ic = 0; ic < p.in_ch; ++ic) {
          for (int ky = 0; ky < p.ksize; ++ky) {
            int iy = base_y + ky * p.dilation;
            if (iy < 0 || iy >= x.height) continue;
            for (int kx = 0; kx < p.ksize; ++kx) {
              int ix = base_x + kx * p.dilation;
              if (ix < 0 || ix >= x.width) continue;
              p.weight_grad[widx(p, oc, ic, ky, kx)] += g * x.at(ic, ix, iy);
              gx.at(ic, ix, iy) += g * p.weight[widx(p, oc, ic, ky, kx)];
            }
          }
        }
      }
    }
  }
  return gx;
}

ToyFeatureMap relu(const ToyFeatureMap& x) {
  ToyFeatureMap y = x;
  for (double& v : y.values) v = v > 0.0 ? v : 0.0;
  return y;
}

ToyFeatureMap relu_backward(const ToyFeatureMap& pre, const ToyFeatureMap& grad_out) {
  if (pre.values.size() != grad_out.values.size())
    throw std::invalid_argument("relu gradient shape mismatch");
  ToyFeatureMap gx = pre;
  for (std::size_t i = 0; i < gx.values.size(); ++i)
    gx.values[i] = pre.values[i] > 0.0 ? grad_out.values[i] : 0.0;
  return gx;
}

double softplus(double x) {
  // max(x,0) + log1p(exp(-|x|)) is stable on both tails.
  return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::abs(x)));
}

DensityGrid softplus_head(const ToyFeatureMap& pre) {
  validate_feature_map(pre);
  if (pre.channels != 1) throw std::invalid_argument("softplus head expects a single channel");
  DensityGrid out = DensityGrid::zeros(pre.width, pre.height);
  for (std::size_t i = 0; i < pre.values.size(); ++i) out.values[i] = softplus(pre.values[i]);
  return out;
}

ToyFeatureMap softplus_head_backward(const ToyFeatureMap& pre, const DensityGrid& grad_out) {
  if (pre.channels != 1 || pre.width != grad_out.width || pre.height != grad_out.height)
    throw std::invalid_argument("softplus head gradient shape mismatch");
  ToyFeatureMap gx = pre;
  for (std::size_t i = 0; i < gx.values.size(); ++i) {
    double s = 1.0 / (1.0 + std::exp(-pre.values[i]));  // d softplus = sigmoid
    gx.values[i] = grad_out.values[i] * s;
  }
  return gx;
}

ToyFeatureMap upsample_feature(const ToyFeatureMap& f, int out_w, int out_h) {
  validate_feature_map(f);
  ToyFeatureMap out = ToyFeatureMap::zeros(f.channels, out_w, out_h);
  DensityGrid chan = DensityGrid::zeros(f.width, f.height);
  for (int c = 0; c < f.channels; ++c) {
    std::copy_n(f.values.begin() + static_cast<std::ptrdiff_t>(c) * f.width * f.height,
                static_cast<std::ptrdiff_t>(f.width) * f.height, chan.values.begin());
    DensityGrid up = bilinear_upsample(chan, out_w, out_h);
    std::copy_n(up.values.begin(), static_cast<std::ptrdiff_t>(out_w) * out_h,
                out.values.begin() + static_cast<std::ptrdiff_t>(c) * out_w * out_h);
  }
  return out;
}

ToyFeatureMap upsample_feature_adjoint(const ToyFeatureMap& grad_out, int in_w, int in_h) {
  validate_feature_map(grad_out);
  ToyFeatureMap out = ToyFeatureMap::zeros(grad_out.channels, in_w, in_h);
  DensityGrid chan = DensityGrid::zeros(grad_out.width, grad_out.height);
  for (int c = 0; c < grad_out.channels; ++c) {
    std::copy_n(
        grad_out.values.begin() + static_cast<std::ptrdiff_t>(c) * grad_out.width * grad_out.height,
        static_cast<std::ptrdiff_t>(grad_out.width) * grad_out.height, chan.values.begin());
    DensityGrid down = bilinear_upsample_adjoint(chan, in_w, in_h);
    std::copy_n(down.values.begin(), static_cast<std::ptrdiff_t>(in_w) * in_h,
                out.values.begin() + static_cast<std::ptrdiff_t>(c) * in_w * in_h);
  }
  return out;
}

ToyFeatureMap concat_channels(const ToyFeatureMap& a, const ToyFeatureMap& b) {
  validate_feature_map(a);
  validate_feature_map(b);
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("concat spatial shape mismatch");
  ToyFeatureMap out = ToyFeatureMap::zeros(a.channels + b.channels, a.width, a.height);
  std::copy(a.values.begin(), a.values.end(), out.values.begin());
  std::copy(b.values.begin(), b.values.end(),
            out.values.begin() + static_cast<std::ptrdiff_t>(a.values.size()));
  return out;
}

void split_channels_backward(const ToyFeatureMap& grad_concat, ToyFeatureMap& grad_a,
                             ToyFeatureMap& grad_b) {
  if (grad_concat.channels != grad_a.channels + grad_b.channels ||
      grad_concat.width != grad_a.width || grad_concat.height != grad_a.height ||
      grad_a.width != grad_b.width || grad_a.height != grad_b.height)
    throw std::invalid_argument("split gradient shape mismatch");
  std::copy_n(grad_concat.values.begin(), static_cast<std::ptrdiff_t>(grad_a.values.size()),
              grad_a.values.begin());
  std::copy_n(grad_concat.values.begin() + static_cast<std::ptrdiff_t>(grad_a.values.size()),
              static_cast<std::ptrdiff_t>(grad_b.values.size()), grad_b.values.begin());
}

DensityGrid resize_density(const DensityGrid& g, int out_w, int out_h) {
  DensityGrid out = bilinear_upsample(g, out_w, out_h);
  double scale = static_cast<double>(g.width) * g.height /
                 (static_cast<double>(out_w) * out_h);
  for (double& v : out.values) v *= scale;
  return out;
}

DensityGrid resize_density_backward(const DensityGrid& grad_out, int in_w, int in_h) {
  DensityGrid gx = bilinear_upsample_adjoint(grad_out, in_w, in_h);
  double scale = static_cast<double>(in_w) * in_h /
                 (static_cast<double>(grad_out.width) * grad_out.height);
  for (double& v : gx.values) v *= scale;
  return gx;
}

}  // namespace ctas
