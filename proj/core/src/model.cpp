#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "ctas/grid_io.hpp"
#include "ctas/model.hpp"
#include "json.hpp"

namespace ctas {

namespace {

bool valid_layer_count(int n) { return n == 0 || n == 2 || n == 4 || n == 6 || n == 8; }

void require_positive_channels(const std::vector<int>& chans, const char* what) {
  for (int c : chans)
    if (c < 1) throw std::invalid_argument(std::string(what) + ": channel widths must be positive");
}

}  // namespace

void validate_net_config(const NetConfig& cfg) {
  if (cfg.d_model < 2 || cfg.heads < 1 || cfg.d_model % cfg.heads != 0)
    throw std::invalid_argument("d_model must be at least 2 and divisible by the head count");
  if (!valid_layer_count(cfg.n_layers))
    throw std::invalid_argument("encoder depth must be one of {0, 2, 4, 6, 8}");
  if (cfg.backbone_channels.size() != 3)
    throw std::invalid_argument("backbone needs exactly three intermediate channel widths");
  require_positive_channels(cfg.backbone_channels, "backbone");
  if (cfg.cnn_decoder_channels.size() != 4 || cfg.cnn_decoder_channels.back() != 1)
    throw std::invalid_argument("cnn decoder needs four channel widths ending in 1");
  require_positive_channels(cfg.cnn_decoder_channels, "cnn decoder");
  if (cfg.t_decoder_channels.size() != 2)
    throw std::invalid_argument("transformer decoder needs exactly two channel widths");
  require_positive_channels(cfg.t_decoder_channels, "transformer decoder");
  if (cfg.selection_k < 1) throw std::invalid_argument("selection_k must be positive");
  if (!std::isfinite(cfg.head_bias)) throw std::invalid_argument("head_bias must be finite");
  if (!std::isfinite(cfg.input_gain) || cfg.input_gain <= 0.0)
    throw std::invalid_argument("input_gain must be positive and finite");
}

std::string net_config_to_json(const NetConfig& cfg) {
  nlohmann::json j;
  j["d_model"] = cfg.d_model;
  j["heads"] = cfg.heads;
  j["n_layers"] = cfg.n_layers;
  j["backbone_channels"] = cfg.backbone_channels;
  j["cnn_decoder_channels"] = cfg.cnn_decoder_channels;
  j["t_decoder_channels"] = cfg.t_decoder_channels;
  j["full_aspp_rates"] = cfg.full_aspp_rates;
  j["fusion"] = fusion_mode_name(cfg.fusion);
  j["selection_k"] = cfg.selection_k;
  j["head_bias"] = cfg.head_bias;
  j["input_gain"] = cfg.input_gain;
  return j.dump(2);
}

NetConfig net_config_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  if (!j.is_object()) throw std::invalid_argument("net config must be a JSON object");
  NetConfig cfg;  // absent keys keep their defaults
  if (j.contains("d_model")) cfg.d_model = j.at("d_model").get<int>();
  if (j.contains("heads")) cfg.heads = j.at("heads").get<int>();
  if (j.contains("n_layers")) cfg.n_layers = j.at("n_layers").get<int>();
  if (j.contains("backbone_channels"))
    cfg.backbone_channels = j.at("backbone_channels").get<std::vector<int>>();
  if (j.contains("cnn_decoder_channels"))
    cfg.cnn_decoder_channels = j.at("cnn_decoder_channels").get<std::vector<int>>();
  if (j.contains("t_decoder_channels"))
    cfg.t_decoder_channels = j.at("t_decoder_channels").get<std::vector<int>>();
  if (j.contains("full_aspp_rates")) cfg.full_aspp_rates = j.at("full_aspp_rates").get<bool>();
  if (j.contains("fusion")) cfg.fusion = fusion_mode_from_name(j.at("fusion").get<std::string>());
  if (j.contains("selection_k")) cfg.selection_k = j.at("selection_k").get<int>();
  if (j.contains("head_bias")) cfg.head_bias = j.at("head_bias").get<double>();
  if (j.contains("input_gain")) cfg.input_gain = j.at("input_gain").get<double>();
  validate_net_config(cfg);
  return cfg;
}

namespace {

// All weights draw from one generator in a fixed order, so a seed pins the
// full parameter vector. Convs and feed-forward layers (relu fan-in) use
// sqrt(2/fan_in); attention projections use sqrt(1/d) to keep logits tame.
void init_gaussian(std::vector<double>& w, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : w) v = dist(rng);
}

void init_conv(Conv2d& c, std::mt19937_64& rng) {
  double fan_in = static_cast<double>(c.in_ch) * c.ksize * c.ksize;
  init_gaussian(c.weight, std::sqrt(2.0 / fan_in), rng);
}

void init_linear(LinearParams& p, std::mt19937_64& rng) {
  init_gaussian(p.weight, std::sqrt(2.0 / p.in), rng);
}

void init_encoder_layer(EncoderLayerParams& p, std::mt19937_64& rng) {
  double stddev = std::sqrt(1.0 / p.d);
  init_gaussian(p.w_q, stddev, rng);
  init_gaussian(p.w_k, stddev, rng);
  init_gaussian(p.w_v, stddev, rng);
  init_linear(p.ffn1, rng);
  init_linear(p.ffn2, rng);
}

}  // namespace

CtasModel make_model(const NetConfig& cfg, std::uint64_t seed) {
  validate_net_config(cfg);
  std::mt19937_64 rng(seed);

  CtasModel m;
  m.config = cfg;

  const std::vector<int>& bb = cfg.backbone_channels;
  m.backbone.push_back(make_conv(1, bb[0], 3, 2));
  m.backbone.push_back(make_conv(bb[0], bb[1], 3, 2));
  m.backbone.push_back(make_conv(bb[1], bb[2], 3, 2));
  m.backbone.push_back(make_conv(bb[2], cfg.d_model, 3, 2));
  for (Conv2d& c : m.backbone) init_conv(c, rng);

  for (int l = 0; l < cfg.n_layers; ++l) {
    m.t_branch.layers.push_back(make_encoder_layer(cfg.d_model, cfg.heads));
    init_encoder_layer(m.t_branch.layers.back(), rng);
  }
  const std::vector<int>& td = cfg.t_decoder_channels;
  m.t_branch.dec1 = make_conv(cfg.d_model, td[0], 3);
  m.t_branch.dec2 = make_conv(td[0], td[1], 3);
  m.t_branch.head = make_conv(td[1], 1, 1);
  init_conv(m.t_branch.dec1, rng);
  init_conv(m.t_branch.dec2, rng);
  init_conv(m.t_branch.head, rng);
  m.t_branch.head.bias[0] = cfg.head_bias;

  m.c_branch.aspp = make_aspp(cfg.d_model, cfg.full_aspp_rates);
  for (Conv2d& c : m.c_branch.aspp.branches) init_conv(c, rng);
  init_conv(m.c_branch.aspp.mix, rng);
  const std::vector<int>& cd = cfg.cnn_decoder_channels;
  m.c_branch.decoder.push_back(make_conv(cfg.d_model + bb[2], cd[0], 3));
  m.c_branch.decoder.push_back(make_conv(cd[0], cd[1], 3));
  m.c_branch.decoder.push_back(make_conv(cd[1], cd[2], 3));
  m.c_branch.decoder.push_back(make_conv(cd[2], cd[3], 1));
  for (Conv2d& c : m.c_branch.decoder) init_conv(c, rng);
  m.c_branch.decoder.back().bias[0] = cfg.head_bias;

  m.selection.t.k = cfg.selection_k;
  m.selection.c.k = cfg.selection_k;
  return m;
}

namespace {

void add_view(std::vector<ParamView>& views, std::string name, std::vector<double>& data,
              std::vector<double>& grad) {
  views.push_back({std::move(name), data.data(), grad.data(), data.size()});
}

void add_scalar(std::vector<ParamView>& views, std::string name, double& data, double& grad) {
  views.push_back({std::move(name), &data, &grad, 1});
}

void add_conv(std::vector<ParamView>& views, const std::string& prefix, Conv2d& c) {
  add_view(views, prefix + ".weight", c.weight, c.weight_grad);
  add_view(views, prefix + ".bias", c.bias, c.bias_grad);
}

void add_linear(std::vector<ParamView>& views, const std::string& prefix, LinearParams& p) {
  add_view(views, prefix + ".weight", p.weight, p.weight_grad);
  add_view(views, prefix + ".bias", p.bias, p.bias_grad);
}

void add_layer_norm(std::vector<ParamView>& views, const std::string& prefix, LayerNormParams& p) {
  add_view(views, prefix + ".gain", p.gain, p.gain_grad);
  add_view(views, prefix + ".bias", p.bias, p.bias_grad);
}

}  // namespace

std::vector<ParamView> param_registry(CtasModel& model) {
  std::vector<ParamView> v;
  for (std::size_t i = 0; i < model.backbone.size(); ++i)
    add_conv(v, "backbone." + std::to_string(i), model.backbone[i]);

  for (std::size_t l = 0; l < model.t_branch.layers.size(); ++l) {
    std::string prefix = "t.enc." + std::to_string(l);
    EncoderLayerParams& layer = model.t_branch.layers[l];
    add_view(v, prefix + ".w_q", layer.w_q, layer.w_q_grad);
    add_view(v, prefix + ".w_k", layer.w_k, layer.w_k_grad);
    add_view(v, prefix + ".w_v", layer.w_v, layer.w_v_grad);
    add_linear(v, prefix + ".ffn1", layer.ffn1);
    add_linear(v, prefix + ".ffn2", layer.ffn2);
    add_layer_norm(v, prefix + ".ln1", layer.ln1);
    add_layer_norm(v, prefix + ".ln2", layer.ln2);
  }
  add_conv(v, "t.dec1", model.t_branch.dec1);
  add_conv(v, "t.dec2", model.t_branch.dec2);
  add_conv(v, "t.head", model.t_branch.head);

  for (std::size_t b = 0; b < model.c_branch.aspp.branches.size(); ++b)
    add_conv(v, "c.aspp." + std::to_string(b), model.c_branch.aspp.branches[b]);
  add_conv(v, "c.aspp.mix", model.c_branch.aspp.mix);
  for (std::size_t i = 0; i < model.c_branch.decoder.size(); ++i)
    add_conv(v, "c.dec." + std::to_string(i), model.c_branch.decoder[i]);

  add_scalar(v, "selection.t.w1", model.selection.t.w1, model.selection_grad_t.w1);
  add_scalar(v, "selection.t.b1", model.selection.t.b1, model.selection_grad_t.b1);
  add_scalar(v, "selection.t.w2", model.selection.t.w2, model.selection_grad_t.w2);
  add_scalar(v, "selection.t.b2", model.selection.t.b2, model.selection_grad_t.b2);
  add_scalar(v, "selection.c.w1", model.selection.c.w1, model.selection_grad_c.w1);
  add_scalar(v, "selection.c.b1", model.selection.c.b1, model.selection_grad_c.b1);
  add_scalar(v, "selection.c.w2", model.selection.c.w2, model.selection_grad_c.w2);
  add_scalar(v, "selection.c.b2", model.selection.c.b2, model.selection_grad_c.b2);
  return v;
}

std::size_t param_count(const CtasModel& model) {
  std::size_t total = 0;
  for (const ParamView& view : param_registry(const_cast<CtasModel&>(model))) total += view.count;
  return total;
}

void zero_grads(CtasModel& model) {
  for (ParamView& view : param_registry(model)) std::fill(view.grad, view.grad + view.count, 0.0);
}

namespace {

DensityGrid average_pair(const DensityGrid& a, const DensityGrid& b) {
  DensityGrid out = DensityGrid::zeros(a.width, a.height);
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = 0.5 * (a.values[i] + b.values[i]);
  return out;
}

}  // namespace

ModelForward model_forward(const CtasModel& model, const DensityGrid& image) {
  validate_net_config(model.config);
  validate_grid(image);
  if (image.width < 16 || image.height < 16 || image.width % 16 != 0 || image.height % 16 != 0)
    throw std::invalid_argument("model input dims must be multiples of 16, at least 16");

  ModelForward fwd;
  fwd.input = ToyFeatureMap::zeros(1, image.width, image.height);
  for (std::size_t i = 0; i < image.values.size(); ++i)
    fwd.input.values[i] = image.values[i] * model.config.input_gain;

  const ToyFeatureMap* x = &fwd.input;
  for (const Conv2d& conv : model.backbone) {
    fwd.bb_pre.push_back(conv_forward(*x, conv));
    fwd.bb_act.push_back(relu(fwd.bb_pre.back()));
    x = &fwd.bb_act.back();
  }
  fwd.f4 = fwd.bb_act[2];
  fwd.f5 = fwd.bb_act[3];

  int out_w = image.width / 4, out_h = image.height / 4;
  BranchForward& br = fwd.branches;

  // Transformer branch: tokens through the encoder stack, then decode.
  br.tokens_in = flatten_tokens(fwd.f5);
  TokenSequence z = br.tokens_in;
  br.enc.resize(model.t_branch.layers.size());
  for (std::size_t l = 0; l < model.t_branch.layers.size(); ++l)
    z = encoder_layer_forward(z, model.t_branch.layers[l], br.enc[l]);
  br.tokens_out = z;
  br.t_feat = unflatten_tokens(br.tokens_out, fwd.f5.width, fwd.f5.height);
  br.t_up = upsample_feature(br.t_feat, fwd.f4.width * 2, fwd.f4.height * 2);
  br.t_pre1 = conv_forward(br.t_up, model.t_branch.dec1);
  br.t_act1 = relu(br.t_pre1);
  br.t_pre2 = conv_forward(br.t_act1, model.t_branch.dec2);
  br.t_act2 = relu(br.t_pre2);
  br.t_head_pre = conv_forward(br.t_act2, model.t_branch.head);
  br.d_t_small = softplus_head(br.t_head_pre);
  fwd.d_t = resize_density(br.d_t_small, out_w, out_h);

  // CNN branch: multi-scale context on F5, fused with F4 detail.
  br.f5p = aspp_forward(fwd.f5, model.c_branch.aspp, br.aspp);
  br.f5p_up = upsample_feature(br.f5p, fwd.f4.width, fwd.f4.height);
  br.cat = concat_channels(br.f5p_up, fwd.f4);
  br.cat_up = upsample_feature(br.cat, fwd.f4.width * 2, fwd.f4.height * 2);
  const ToyFeatureMap* cx = &br.cat_up;
  for (int i = 0; i < 3; ++i) {
    br.c_pre.push_back(conv_forward(*cx, model.c_branch.decoder[i]));
    br.c_act.push_back(relu(br.c_pre.back()));
    cx = &br.c_act.back();
  }
  br.c_head_pre = conv_forward(*cx, model.c_branch.decoder[3]);
  br.d_c_small = softplus_head(br.c_head_pre);
  fwd.d_c = resize_density(br.d_c_small, out_w, out_h);

  switch (model.config.fusion) {
    case FusionMode::adaptive:
      fwd.fusion = asm_forward(fwd.d_t, fwd.d_c, model.selection);
      fwd.prediction = fwd.fusion.fused;
      break;
    case FusionMode::concat:
      fwd.prediction = average_pair(fwd.d_t, fwd.d_c);
      break;
    case FusionMode::cnn_only:
      fwd.prediction = fwd.d_c;
      break;
    case FusionMode::transformer_only:
      fwd.prediction = fwd.d_t;
      break;
  }
  fwd.cached = true;
  return fwd;
}

void model_backward(CtasModel& model, const ModelForward& fwd, const DensityGrid& grad_prediction) {
  if (!fwd.cached) throw std::invalid_argument("model_backward needs a cached forward pass");
  if (grad_prediction.width != fwd.prediction.width ||
      grad_prediction.height != fwd.prediction.height)
    throw std::invalid_argument("prediction gradient shape mismatch");

  DensityGrid g_dt, g_dc;
  switch (model.config.fusion) {
    case FusionMode::adaptive: {
      AsmGradients ag = asm_backward(grad_prediction, fwd.fusion, model.selection);
      g_dt = std::move(ag.wrt_d_t);
      g_dc = std::move(ag.wrt_d_c);
      model.selection_grad_t.w1 += ag.t.w1;
      model.selection_grad_t.b1 += ag.t.b1;
      model.selection_grad_t.w2 += ag.t.w2;
      model.selection_grad_t.b2 += ag.t.b2;
      model.selection_grad_c.w1 += ag.c.w1;
      model.selection_grad_c.b1 += ag.c.b1;
      model.selection_grad_c.w2 += ag.c.w2;
      model.selection_grad_c.b2 += ag.c.b2;
      break;
    }
    case FusionMode::concat: {
      g_dt = DensityGrid::zeros(grad_prediction.width, grad_prediction.height);
      for (std::size_t i = 0; i < g_dt.values.size(); ++i)
        g_dt.values[i] = 0.5 * grad_prediction.values[i];
      g_dc = g_dt;
      break;
    }
    case FusionMode::cnn_only:
      g_dc = grad_prediction;
      g_dt = DensityGrid::zeros(grad_prediction.width, grad_prediction.height);
      break;
    case FusionMode::transformer_only:
      g_dt = grad_prediction;
      g_dc = DensityGrid::zeros(grad_prediction.width, grad_prediction.height);
      break;
  }

  const BranchForward& br = fwd.branches;

  // Transformer branch, reversed.
  DensityGrid g_small = resize_density_backward(g_dt, br.d_t_small.width, br.d_t_small.height);
  ToyFeatureMap g = softplus_head_backward(br.t_head_pre, g_small);
  g = conv_backward(br.t_act2, model.t_branch.head, g);
  g = relu_backward(br.t_pre2, g);
  g = conv_backward(br.t_act1, model.t_branch.dec2, g);
  g = relu_backward(br.t_pre1, g);
  g = conv_backward(br.t_up, model.t_branch.dec1, g);
  ToyFeatureMap g_tfeat = upsample_feature_adjoint(g, br.t_feat.width, br.t_feat.height);
  TokenSequence g_tokens = flatten_tokens(g_tfeat);
  for (std::size_t l = model.t_branch.layers.size(); l-- > 0;)
    g_tokens = encoder_layer_backward(model.t_branch.layers[l], br.enc[l], g_tokens);
  ToyFeatureMap g_f5 = unflatten_tokens(g_tokens, fwd.f5.width, fwd.f5.height);

  // CNN branch, reversed.
  g_small = resize_density_backward(g_dc, br.d_c_small.width, br.d_c_small.height);
  g = softplus_head_backward(br.c_head_pre, g_small);
  g = conv_backward(br.c_act[2], model.c_branch.decoder[3], g);
  g = relu_backward(br.c_pre[2], g);
  g = conv_backward(br.c_act[1], model.c_branch.decoder[2], g);
  g = relu_backward(br.c_pre[1], g);
  g = conv_backward(br.c_act[0], model.c_branch.decoder[1], g);
  g = relu_backward(br.c_pre[0], g);
  ToyFeatureMap g_cat_up = conv_backward(br.cat_up, model.c_branch.decoder[0], g);
  ToyFeatureMap g_cat = upsample_feature_adjoint(g_cat_up, br.cat.width, br.cat.height);
  ToyFeatureMap g_f5p_up = ToyFeatureMap::zeros(br.f5p_up.channels, br.f5p_up.width,
                                                br.f5p_up.height);
  ToyFeatureMap g_f4 = ToyFeatureMap::zeros(fwd.f4.channels, fwd.f4.width, fwd.f4.height);
  split_channels_backward(g_cat, g_f5p_up, g_f4);
  ToyFeatureMap g_f5p = upsample_feature_adjoint(g_f5p_up, fwd.f5.width, fwd.f5.height);
  ToyFeatureMap g_f5_cnn = aspp_backward(fwd.f5, model.c_branch.aspp, br.aspp, g_f5p);
  for (std::size_t i = 0; i < g_f5.values.size(); ++i) g_f5.values[i] += g_f5_cnn.values[i];

  // Backbone, reversed; F4 also fed the concat, so its gradient has two parts.
  g = relu_backward(fwd.bb_pre[3], g_f5);
  g = conv_backward(fwd.bb_act[2], model.backbone[3], g);
  for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] += g_f4.values[i];
  g = relu_backward(fwd.bb_pre[2], g);
  g = conv_backward(fwd.bb_act[1], model.backbone[2], g);
  g = relu_backward(fwd.bb_pre[1], g);
  g = conv_backward(fwd.bb_act[0], model.backbone[1], g);
  g = relu_backward(fwd.bb_pre[0], g);
  conv_backward(fwd.input, model.backbone[0], g);  // input gradient discarded
}

DensityGrid transformer_branch(const ToyFeatureMap& f5, const TransformerBranchParams& p,
                               int n_layers, int out_w, int out_h) {
  if (!valid_layer_count(n_layers))
    throw std::invalid_argument("encoder depth must be one of {0, 2, 4, 6, 8}");
  if (static_cast<int>(p.layers.size()) != n_layers)
    throw std::invalid_argument("layer parameter count does not match the requested depth");
  TokenSequence z = flatten_tokens(f5);
  for (const EncoderLayerParams& layer : p.layers) z = encoder_layer(z, layer);
  ToyFeatureMap feat = unflatten_tokens(z, f5.width, f5.height);
  ToyFeatureMap up = upsample_feature(feat, f5.width * 4, f5.height * 4);
  ToyFeatureMap a1 = relu(conv_forward(up, p.dec1));
  ToyFeatureMap a2 = relu(conv_forward(a1, p.dec2));
  DensityGrid small = softplus_head(conv_forward(a2, p.head));
  return resize_density(small, out_w, out_h);
}

DensityGrid cnn_branch(const ToyFeatureMap& f4, const ToyFeatureMap& f5, const CnnBranchParams& p,
                       int out_w, int out_h) {
  if (p.decoder.size() != 4) throw std::invalid_argument("cnn decoder needs four convolutions");
  ToyFeatureMap f5p = aspp(f5, p.aspp);
  ToyFeatureMap up = upsample_feature(f5p, f4.width, f4.height);
  ToyFeatureMap cat = concat_channels(up, f4);
  ToyFeatureMap cat_up = upsample_feature(cat, f4.width * 2, f4.height * 2);
  ToyFeatureMap a = relu(conv_forward(cat_up, p.decoder[0]));
  a = relu(conv_forward(a, p.decoder[1]));
  a = relu(conv_forward(a, p.decoder[2]));
  DensityGrid small = softplus_head(conv_forward(a, p.decoder[3]));
  return resize_density(small, out_w, out_h);
}

void save_checkpoint(const CtasModel& model, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<ParamView> views = param_registry(const_cast<CtasModel&>(model));

  nlohmann::json manifest;
  manifest["config"] = nlohmann::json::parse(net_config_to_json(model.config));
  nlohmann::json params = nlohmann::json::array();
  for (const ParamView& view : views) {
    DensityGrid flat;
    flat.width = static_cast<int>(view.count);
    flat.height = 1;
    flat.values.assign(view.data, view.data + view.count);
    std::string file = view.name + ".dgrd";
    write_grid_binary(flat, (std::filesystem::path(dir) / file).string());
    params.push_back({{"name", view.name}, {"count", view.count}, {"file", file}});
  }
  manifest["params"] = params;

  std::ofstream out(std::filesystem::path(dir) / "manifest.json");
  if (!out) throw std::runtime_error("cannot write checkpoint manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

CtasModel load_checkpoint(const std::string& dir) {
  std::filesystem::path root(dir);
  std::ifstream in(root / "manifest.json");
  if (!in) throw std::runtime_error("cannot read checkpoint manifest in " + dir);
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json manifest = nlohmann::json::parse(buf.str());

  NetConfig cfg = net_config_from_json(manifest.at("config").dump());
  CtasModel model = make_model(cfg, 0);
  std::vector<ParamView> views = param_registry(model);
  const nlohmann::json& params = manifest.at("params");
  if (params.size() != views.size())
    throw std::runtime_error("checkpoint parameter list does not match the model layout");
  for (std::size_t i = 0; i < views.size(); ++i) {
    const nlohmann::json& entry = params.at(i);
    if (entry.at("name").get<std::string>() != views[i].name ||
        entry.at("count").get<std::size_t>() != views[i].count)
      throw std::runtime_error("checkpoint entry mismatch at " + views[i].name);
    DensityGrid flat = read_grid_binary((root / entry.at("file").get<std::string>()).string());
    if (flat.values.size() != views[i].count)
      throw std::runtime_error("checkpoint payload size mismatch at " + views[i].name);
    std::copy(flat.values.begin(), flat.values.end(), views[i].data);
  }
  return model;
}

}  // namespace ctas
