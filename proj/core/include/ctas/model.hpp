#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctas/adaptive_selection.hpp"
#include "ctas/grid.hpp"
#include "ctas/nets.hpp"

namespace ctas {

// Toy-scale network shape. Defaults are the smallest sizes that exercise
// every mechanism (multi-head splitting, ASPP, fusion) within CPU budgets;
// paper_decoder_channels() restores the published CNN-decoder widths.
struct NetConfig {
  int d_model = 32;
  int heads = 4;
  int n_layers = 4;  // encoder depth; {0, 2, 4, 6, 8} supported
  std::vector<int> backbone_channels = {8, 16, 16};     // three stride-2 convs to F4
  std::vector<int> cnn_decoder_channels = {32, 16, 8, 1};
  std::vector<int> t_decoder_channels = {16, 8};        // two 3x3 mixes before the head
  bool full_aspp_rates = false;                         // (1,6,12,18) instead of (1,2,3,4)
  FusionMode fusion = FusionMode::adaptive;
  int selection_k = 6;
  double head_bias = -1.5;   // softplus head starts light so descent has headroom
  double input_gain = 20.0;  // rasterized scenes are tiny; fixed input scale

  static std::vector<int> paper_decoder_channels() { return {256, 64, 32, 1}; }
};

void validate_net_config(const NetConfig& cfg);
std::string net_config_to_json(const NetConfig& cfg);
NetConfig net_config_from_json(const std::string& json_text);

struct TransformerBranchParams {
  std::vector<EncoderLayerParams> layers;
  Conv2d dec1, dec2, head;  // two 3x3 mixes + 1x1 head
};

struct CnnBranchParams {
  AsppParams aspp;
  std::vector<Conv2d> decoder;  // three 3x3 convs + 1x1 head
};

// Full model: shared strided-conv backbone stub producing F4 (stride 8) and
// F5 (stride 16), the two estimation branches, and the fusion parameters.
struct CtasModel {
  NetConfig config;
  std::vector<Conv2d> backbone;  // three convs to F4, one more to F5
  TransformerBranchParams t_branch;
  CnnBranchParams c_branch;
  AsmParams selection;
  AsmBranchGrads selection_grad_t, selection_grad_c;
};

CtasModel make_model(const NetConfig& cfg, std::uint64_t seed);

// Named view of every trainable scalar and its gradient slot.
struct ParamView {
  std::string name;
  double* data = nullptr;
  double* grad = nullptr;
  std::size_t count = 0;
};

std::vector<ParamView> param_registry(CtasModel& model);
std::size_t param_count(const CtasModel& model);
void zero_grads(CtasModel& model);

struct BranchForward {
  // transformer branch
  TokenSequence tokens_in;
  std::vector<EncoderLayerCache> enc;
  TokenSequence tokens_out;
  ToyFeatureMap t_feat, t_up;
  ToyFeatureMap t_pre1, t_act1, t_pre2, t_act2, t_head_pre;
  DensityGrid d_t_small;
  // cnn branch
  AsppCache aspp;
  ToyFeatureMap f5p, f5p_up, cat, cat_up;
  std::vector<ToyFeatureMap> c_pre, c_act;
  ToyFeatureMap c_head_pre;
  DensityGrid d_c_small;
};

struct ModelForward {
  ToyFeatureMap input;  // gain-scaled single-channel image
  std::vector<ToyFeatureMap> bb_pre, bb_act;
  ToyFeatureMap f4, f5;
  BranchForward branches;
  DensityGrid d_t, d_c;       // at prediction resolution (input / 4)
  AsmForward fusion;          // populated for FusionMode::adaptive
  DensityGrid prediction;
  bool cached = false;
};

// Runs the model on a raw scene image (the input gain is applied inside).
// Image dims must be multiples of 16 and at least 16.
ModelForward model_forward(const CtasModel& model, const DensityGrid& image);

// Accumulates parameter gradients for d(loss)/d(prediction).
void model_backward(CtasModel& model, const ModelForward& fwd, const DensityGrid& grad_prediction);

// Standalone branch drivers (forward only), shapes as in model_forward.
DensityGrid transformer_branch(const ToyFeatureMap& f5, const TransformerBranchParams& p,
                               int n_layers, int out_w, int out_h);
DensityGrid cnn_branch(const ToyFeatureMap& f4, const ToyFeatureMap& f5,
                       const CnnBranchParams& p, int out_w, int out_h);

// Checkpoints: one binary grid per parameter plus a JSON manifest of the
// config and shapes. load rebuilds the model from the manifest.
void save_checkpoint(const CtasModel& model, const std::string& dir);
CtasModel load_checkpoint(const std::string& dir);

}  // namespace ctas
