#ifndef MSP_MODEL_MODEL_HPP_
#define MSP_MODEL_MODEL_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "msp/core/image.hpp"
#include "msp/nn/ops.hpp"
#include "msp/nn/tape.hpp"

namespace msp {

enum class Backbone { kTinyCnn, kResnet50 };

std::string to_string(Backbone b);
Backbone backbone_from_string(const std::string& name);

enum class ForwardMode { kTrain, kEval };

/// Network configuration. Defaults target the full-scale setup (384x192
/// inputs); the desk-scale harness overrides input size to 64x32 with the
/// tiny backbone.
struct ModelConfig {
  Backbone backbone = Backbone::kTinyCnn;
  int input_height = 384;
  int input_width = 192;
  int embed_dim = 128;  // pooled embedding size; ID-feature channels = half
  int num_identities = 1;
  int num_clothes_classes = 1;
  bool rpa_enabled = true;

  void validate() const;
  int total_stride() const { return 16; }  // both backbones end at H/16
  int feature_height() const { return input_height / total_stride(); }
  int feature_width() const { return input_width / total_stride(); }
  int id_channels() const { return embed_dim / 2; }
};

/// Handles into one forward pass. All Vars live on the tape passed to
/// forward(); param_vars maps parameter names to their leaves so the
/// training loop can read gradients after backward().
struct ModelOutputs {
  nn::Var backbone_features;  // [N, C, H', W']
  nn::Var id_features;        // [N, C', H', W']
  nn::Var attention_logits;   // [N, 1, H', W']
  nn::Var attention_map;      // [N, 1, H', W'], rows sum to 1
  nn::Var gated_features;     // id_features when the gate is off or in eval
  nn::Var embedding_pre_bn;   // [N, 2C']
  nn::Var embedding_post_bn;  // [N, 2C']
  nn::Var id_logits;          // [N, num_identities]
  nn::Var clothes_logits_head;  // gradients reach the clothes head only
  nn::Var clothes_logits_adv;   // gradients reach the backbone only
  std::map<std::string, nn::Var> param_vars;
};

/// The re-id network. Parameters and batch-norm running statistics are owned
/// here as named tensors; each forward pass copies them onto a fresh tape.
///
/// Parameter names (tiny backbone):
///   backbone.stage{1..4}.conv.w, backbone.stage{1..4}.bn.{g,b},
///   id_head.{w,b}, att_head.{w,b}, clothes_head.{w,b},
///   bnneck.{g,b}, id_cls.w, clothes_cls.{w,b}
/// The ResNet-50 backbone uses backbone.conv1.w, backbone.bn1.{g,b} and
/// backbone.layer{1..4}.{block}.... in place of the stage names.
class ReidModel {
 public:
  ReidModel(ModelConfig config, uint64_t init_seed);

  /// Runs the full pipeline on a batch. Train mode pools the gated ID
  /// features (when RPA is enabled) and normalizes with batch statistics;
  /// eval mode pools the ungated ID features and normalizes with running
  /// statistics. The attention map is computed in both modes (eval needs it
  /// only for dumps). update_bn_stats folds batch statistics into the
  /// running estimates and is meaningful only in train mode.
  ModelOutputs forward(nn::Tape& tape, const std::vector<const Image*>& batch,
                       ForwardMode mode, bool update_bn_stats);

  /// Maxavg pooling + BNNeck on an existing feature grid: returns
  /// (pre-BN, post-BN) embeddings. Metric losses consume pre-BN, the ID
  /// classifier consumes post-BN.
  std::pair<nn::Var, nn::Var> pool_embed(nn::Tape& tape, nn::Var features,
                                         ForwardMode mode,
                                         bool update_bn_stats);

  const ModelConfig& config() const { return config_; }
  std::map<std::string, nn::Tensor>& params() { return params_; }
  const std::map<std::string, nn::Tensor>& params() const { return params_; }
  std::map<std::string, nn::BatchNormState>& bn_states() {
    return bn_states_;
  }

 private:
  nn::Var param(nn::Tape& tape, std::map<std::string, nn::Var>& vars,
                const std::string& name);
  nn::Var frozen(nn::Tape& tape, const std::string& name);
  nn::Var backbone_forward(nn::Tape& tape, nn::Var x, ForwardMode mode,
                           bool update_bn,
                           std::map<std::string, nn::Var>& vars);
  nn::Var bn(nn::Tape& tape, nn::Var x, const std::string& name,
             ForwardMode mode, bool update_bn,
             std::map<std::string, nn::Var>& vars);

  void init_params(uint64_t seed);
  void add_conv(const std::string& name, int co, int ci, int k,
                bool with_bias);
  void add_bn(const std::string& name, int channels);
  void add_linear(const std::string& name, int co, int ci, bool with_bias);

  ModelConfig config_;
  std::map<std::string, nn::Tensor> params_;
  std::map<std::string, nn::BatchNormState> bn_states_;
};

}  // namespace msp

#endif  // MSP_MODEL_MODEL_HPP_
