#include "msp/model/model.hpp"

#include <cmath>

#include "msp/core/error.hpp"
#include "msp/core/rng.hpp"

namespace msp {

namespace {

using nn::Tape;
using nn::Tensor;
using nn::Var;

struct ResnetLayerSpec {
  int blocks;
  int mid;
  int out;
  int stride;
};

// Bottleneck stages of ResNet-50; the final stage keeps stride 1 (the
// common re-id modification, giving a 16x total stride like the tiny net).
constexpr ResnetLayerSpec kResnetLayers[4] = {
    {3, 64, 256, 1}, {4, 128, 512, 2}, {6, 256, 1024, 2}, {3, 512, 2048, 1}};

}  // namespace

std::string to_string(Backbone b) {
  switch (b) {
    case Backbone::kTinyCnn: return "tiny_cnn";
    case Backbone::kResnet50: return "resnet50";
  }
  throw ArgumentError("unknown backbone");
}

Backbone backbone_from_string(const std::string& name) {
  if (name == "tiny_cnn") return Backbone::kTinyCnn;
  if (name == "resnet50") return Backbone::kResnet50;
  throw ConfigError("unknown backbone '" + name +
                    "' (expected 'tiny_cnn' or 'resnet50')");
}

void ModelConfig::validate() const {
  if (input_height <= 0 || input_width <= 0 ||
      input_height % total_stride() != 0 ||
      input_width % total_stride() != 0) {
    throw ConfigError("model input size must be positive and divisible by " +
                      std::to_string(total_stride()) + ", got " +
                      std::to_string(input_height) + "x" +
                      std::to_string(input_width));
  }
  if (embed_dim <= 0 || embed_dim % 2 != 0) {
    throw ConfigError("embed_dim must be a positive even number (max and "
                      "average halves)");
  }
  if (num_identities < 1 || num_clothes_classes < 1) {
    throw ConfigError("model needs at least one identity and one clothes "
                      "class");
  }
}

ReidModel::ReidModel(ModelConfig config, uint64_t init_seed)
    : config_(config) {
  config_.validate();

  const int cp = config_.id_channels();
  int backbone_out = 0;
  if (config_.backbone == Backbone::kTinyCnn) {
    // Four stride-2 stages: 3 -> 8 -> 16 -> 32 -> 64 channels at H/16.
    const int chans[5] = {3, 8, 16, 32, 64};
    for (int s = 1; s <= 4; ++s) {
      add_conv("backbone.stage" + std::to_string(s) + ".conv", chans[s],
               chans[s - 1], 3, false);
      add_bn("backbone.stage" + std::to_string(s) + ".bn", chans[s]);
    }
    backbone_out = chans[4];
  } else {
    add_conv("backbone.conv1", 64, 3, 7, false);
    add_bn("backbone.bn1", 64);
    int in_c = 64;
    for (int l = 0; l < 4; ++l) {
      const ResnetLayerSpec& spec = kResnetLayers[l];
      for (int bidx = 0; bidx < spec.blocks; ++bidx) {
        const std::string base = "backbone.layer" + std::to_string(l + 1) +
                                 "." + std::to_string(bidx);
        const int block_in = bidx == 0 ? in_c : spec.out;
        const int stride = bidx == 0 ? spec.stride : 1;
        add_conv(base + ".conv1", spec.mid, block_in, 1, false);
        add_bn(base + ".bn1", spec.mid);
        add_conv(base + ".conv2", spec.mid, spec.mid, 3, false);
        add_bn(base + ".bn2", spec.mid);
        add_conv(base + ".conv3", spec.out, spec.mid, 1, false);
        add_bn(base + ".bn3", spec.out);
        if (bidx == 0 && (block_in != spec.out || stride != 1)) {
          add_conv(base + ".down.conv", spec.out, block_in, 1, false);
          add_bn(base + ".down.bn", spec.out);
        }
      }
      in_c = spec.out;
    }
    backbone_out = in_c;
  }

  add_conv("id_head", cp, backbone_out, 1, true);
  add_conv("att_head", 1, backbone_out, 1, true);
  add_conv("clothes_head", cp, backbone_out, 1, true);
  add_bn("bnneck", 2 * cp);
  add_linear("id_cls", config_.num_identities, 2 * cp, false);
  add_linear("clothes_cls", config_.num_clothes_classes, 2 * cp, true);

  init_params(init_seed);
}

void ReidModel::add_conv(const std::string& name, int co, int ci, int k,
                         bool with_bias) {
  params_.emplace(name + ".w", Tensor(std::vector<int>{co, ci, k, k}));
  if (with_bias) params_.emplace(name + ".b", Tensor(std::vector<int>{co}));
}

void ReidModel::add_bn(const std::string& name, int channels) {
  params_.emplace(name + ".g", Tensor(std::vector<int>{channels}, 1.0));
  params_.emplace(name + ".b", Tensor(std::vector<int>{channels}));
  nn::BatchNormState state;
  state.running_mean = Tensor(std::vector<int>{channels});
  state.running_var = Tensor(std::vector<int>{channels}, 1.0);
  bn_states_.emplace(name, std::move(state));
}

void ReidModel::add_linear(const std::string& name, int co, int ci,
                           bool with_bias) {
  params_.emplace(name + ".w", Tensor(std::vector<int>{co, ci}));
  if (with_bias) params_.emplace(name + ".b", Tensor(std::vector<int>{co}));
}

void ReidModel::init_params(uint64_t seed) {
  // Every parameter draws from a stream derived from its own name, making
  // initialization independent of registration order.
  RngStream root = RngStream(seed).derive("model-init");
  for (auto& [name, tensor] : params_) {
    const bool is_weight = name.size() > 2 &&
                           name.compare(name.size() - 2, 2, ".w") == 0;
    if (!is_weight) continue;  // biases and BN shifts stay 0 / 1
    if (name.find(".bn") != std::string::npos ||
        name.rfind("bnneck", 0) == 0) {
      continue;  // BN scale already 1
    }
    RngStream rng = root.derive(name);
    double std_dev;
    if (name.rfind("att_head", 0) == 0 || name.rfind("id_cls", 0) == 0 ||
        name.rfind("clothes_cls", 0) == 0) {
      // Small init keeps the initial attention near uniform and classifier
      // logits near zero.
      std_dev = 0.01;
    } else {
      int64_t fan_in = 1;
      for (int i = 1; i < tensor.ndim(); ++i) fan_in *= tensor.dim(i);
      std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    }
    for (int64_t i = 0; i < tensor.numel(); ++i) {
      tensor[i] = rng.normal(0.0, std_dev);
    }
  }
}

Var ReidModel::param(Tape& tape, std::map<std::string, Var>& vars,
                     const std::string& name) {
  auto it = vars.find(name);
  if (it != vars.end()) return it->second;
  auto pit = params_.find(name);
  if (pit == params_.end()) {
    throw ArgumentError("unknown model parameter '" + name + "'");
  }
  Var v = tape.leaf(pit->second);
  vars.emplace(name, v);
  return v;
}

Var ReidModel::frozen(Tape& tape, const std::string& name) {
  auto pit = params_.find(name);
  if (pit == params_.end()) {
    throw ArgumentError("unknown model parameter '" + name + "'");
  }
  // A plain leaf outside param_vars: gradients land in it and are discarded.
  return tape.leaf(pit->second);
}

Var ReidModel::bn(Tape& tape, Var x, const std::string& name,
                  ForwardMode mode, bool update_bn,
                  std::map<std::string, Var>& vars) {
  return nn::batchnorm(tape, x, param(tape, vars, name + ".g"),
                       param(tape, vars, name + ".b"), bn_states_.at(name),
                       mode == ForwardMode::kTrain,
                       mode == ForwardMode::kTrain && update_bn);
}

Var ReidModel::backbone_forward(Tape& tape, Var x, ForwardMode mode,
                                bool update_bn,
                                std::map<std::string, Var>& vars) {
  if (config_.backbone == Backbone::kTinyCnn) {
    Var h = x;
    for (int s = 1; s <= 4; ++s) {
      const std::string base = "backbone.stage" + std::to_string(s);
      h = nn::conv2d(tape, h, param(tape, vars, base + ".conv.w"), Var{}, 2,
                     1);
      h = bn(tape, h, base + ".bn", mode, update_bn, vars);
      h = nn::relu(tape, h);
    }
    return h;
  }

  Var h = nn::conv2d(tape, x, param(tape, vars, "backbone.conv1.w"), Var{},
                     2, 3);
  h = bn(tape, h, "backbone.bn1", mode, update_bn, vars);
  h = nn::relu(tape, h);
  h = nn::maxpool2d(tape, h, 3, 2, 1);

  int in_c = 64;
  for (int l = 0; l < 4; ++l) {
    const ResnetLayerSpec& spec = kResnetLayers[l];
    for (int bidx = 0; bidx < spec.blocks; ++bidx) {
      const std::string base = "backbone.layer" + std::to_string(l + 1) +
                               "." + std::to_string(bidx);
      const int block_in = bidx == 0 ? in_c : spec.out;
      const int stride = bidx == 0 ? spec.stride : 1;

      Var r = nn::conv2d(tape, h, param(tape, vars, base + ".conv1.w"),
                         Var{}, 1, 0);
      r = bn(tape, r, base + ".bn1", mode, update_bn, vars);
      r = nn::relu(tape, r);
      r = nn::conv2d(tape, r, param(tape, vars, base + ".conv2.w"), Var{},
                     stride, 1);
      r = bn(tape, r, base + ".bn2", mode, update_bn, vars);
      r = nn::relu(tape, r);
      r = nn::conv2d(tape, r, param(tape, vars, base + ".conv3.w"), Var{}, 1,
                     0);
      r = bn(tape, r, base + ".bn3", mode, update_bn, vars);

      Var skip = h;
      if (bidx == 0 && (block_in != spec.out || stride != 1)) {
        skip = nn::conv2d(tape, h, param(tape, vars, base + ".down.conv.w"),
                          Var{}, stride, 0);
        skip = bn(tape, skip, base + ".down.bn", mode, update_bn, vars);
      }
      h = nn::relu(tape, nn::add(tape, r, skip));
    }
    in_c = spec.out;
  }
  return h;
}

std::pair<Var, Var> ReidModel::pool_embed(Tape& tape, Var features,
                                          ForwardMode mode,
                                          bool update_bn_stats) {
  Var mx = nn::global_max_pool(tape, features);
  Var av = nn::global_avg_pool(tape, features);
  Var pre = nn::concat_cols(tape, mx, av);
  std::map<std::string, Var> vars;
  Var post = bn(tape, pre, "bnneck", mode, update_bn_stats, vars);
  return {pre, post};
}

ModelOutputs ReidModel::forward(Tape& tape,
                                const std::vector<const Image*>& batch,
                                ForwardMode mode, bool update_bn_stats) {
  if (batch.empty()) {
    throw ArgumentError("forward: empty batch");
  }
  const int h = config_.input_height;
  const int w = config_.input_width;
  for (const Image* img : batch) {
    if (img == nullptr || !img->same_shape(h, w)) {
      throw ArgumentError("forward: image size does not match configured " +
                          std::to_string(h) + "x" + std::to_string(w));
    }
  }
  const int n = static_cast<int>(batch.size());
  Tensor x(std::vector<int>{n, 3, h, w});
  for (int in = 0; in < n; ++in) {
    const float* src = batch[static_cast<size_t>(in)]->data();
    double* dst = x.data() + static_cast<int64_t>(in) * 3 * h * w;
    for (int64_t i = 0; i < static_cast<int64_t>(3) * h * w; ++i) {
      dst[i] = static_cast<double>(src[i]);
    }
  }

  ModelOutputs out;
  const bool update_bn = mode == ForwardMode::kTrain && update_bn_stats;
  Var input = tape.leaf(std::move(x));
  out.backbone_features =
      backbone_forward(tape, input, mode, update_bn, out.param_vars);

  out.id_features = nn::relu(
      tape, nn::conv2d(tape, out.backbone_features,
                       param(tape, out.param_vars, "id_head.w"),
                       param(tape, out.param_vars, "id_head.b"), 1, 0));
  out.attention_logits =
      nn::conv2d(tape, out.backbone_features,
                 param(tape, out.param_vars, "att_head.w"),
                 param(tape, out.param_vars, "att_head.b"), 1, 0);
  out.attention_map = nn::spatial_softmax(tape, out.attention_logits);

  // The gate is a train-time device; eval always pools the ungated features.
  const bool gated = mode == ForwardMode::kTrain && config_.rpa_enabled;
  out.gated_features =
      gated ? nn::gate(tape, out.id_features, out.attention_map)
            : out.id_features;

  Var mx = nn::global_max_pool(tape, out.gated_features);
  Var av = nn::global_avg_pool(tape, out.gated_features);
  out.embedding_pre_bn = nn::concat_cols(tape, mx, av);
  out.embedding_post_bn =
      bn(tape, out.embedding_pre_bn, "bnneck", mode, update_bn_stats,
         out.param_vars);
  out.id_logits = nn::linear(tape, out.embedding_post_bn,
                             param(tape, out.param_vars, "id_cls.w"), Var{});

  // Clothes branch, two gradient paths over the same architecture:
  //  - head path: backbone detached, trains the clothes head;
  //  - adversarial path: head parameters frozen, trains the backbone.
  {
    Var fd = nn::detach(tape, out.backbone_features);
    Var fc = nn::relu(
        tape, nn::conv2d(tape, fd,
                         param(tape, out.param_vars, "clothes_head.w"),
                         param(tape, out.param_vars, "clothes_head.b"), 1,
                         0));
    Var pooled = nn::concat_cols(tape, nn::global_max_pool(tape, fc),
                                 nn::global_avg_pool(tape, fc));
    out.clothes_logits_head =
        nn::linear(tape, pooled, param(tape, out.param_vars, "clothes_cls.w"),
                   param(tape, out.param_vars, "clothes_cls.b"));
  }
  {
    Var fc = nn::relu(
        tape, nn::conv2d(tape, out.backbone_features,
                         frozen(tape, "clothes_head.w"),
                         frozen(tape, "clothes_head.b"), 1, 0));
    Var pooled = nn::concat_cols(tape, nn::global_max_pool(tape, fc),
                                 nn::global_avg_pool(tape, fc));
    out.clothes_logits_adv =
        nn::linear(tape, pooled, frozen(tape, "clothes_cls.w"),
                   frozen(tape, "clothes_cls.b"));
  }

  return out;
}

}  // namespace msp
