#include "msp/losses/losses.hpp"

#include <cmath>
#include <string>

#include "msp/core/error.hpp"

namespace msp {

namespace {

using nn::Tape;
using nn::Tensor;
using nn::Var;

void check_grid_shapes(const SoftGrid& a, const SoftGrid& b,
                       const char* what) {
  if (!a.same_shape(b)) {
    throw ArgumentError(std::string(what) + ": grids disagree on size");
  }
}

}  // namespace

void LossWeights::validate() const {
  if (lambda_tri < 0 || lambda_att < 0 || lambda_cal < 0 || lambda_neg < 0) {
    throw ConfigError("loss weights must be >= 0");
  }
  if (!(epsilon > 0)) {
    throw ConfigError("loss epsilon must be > 0");
  }
}

AttentionTarget attention_target(const SoftGrid& face_ds,
                                 const SoftGrid& limbs_ds,
                                 const SoftGrid& hair_ds, double epsilon) {
  check_grid_shapes(face_ds, limbs_ds, "attention_target");
  check_grid_shapes(face_ds, hair_ds, "attention_target");

  AttentionTarget target;
  target.t_plus = SoftGrid(face_ds.height(), face_ds.width(), 0.0f);
  target.hair_ds = hair_ds;

  double mass = 0;
  for (int y = 0; y < face_ds.height(); ++y) {
    for (int x = 0; x < face_ds.width(); ++x) {
      mass += static_cast<double>(face_ds.at(y, x)) + limbs_ds.at(y, x);
    }
  }
  if (mass == 0.0) {
    target.absent = true;
    return target;
  }
  const double denom = mass + epsilon;
  for (int y = 0; y < face_ds.height(); ++y) {
    for (int x = 0; x < face_ds.width(); ++x) {
      target.t_plus.at(y, x) = static_cast<float>(
          (static_cast<double>(face_ds.at(y, x)) + limbs_ds.at(y, x)) /
          denom);
    }
  }
  return target;
}

Var attention_loss(Tape& tape, Var a_hat,
                   const std::vector<AttentionTarget>& targets,
                   const LossWeights& weights) {
  weights.validate();
  const Tensor& av = tape.val(a_hat);
  if (av.ndim() != 4 || av.dim(1) != 1) {
    throw ArgumentError("attention_loss: attention map must be [N,1,H,W]");
  }
  const int n = av.dim(0), h = av.dim(2), w = av.dim(3);
  if (static_cast<int>(targets.size()) != n) {
    throw ArgumentError("attention_loss: one target per batch row required");
  }

  // Constant weight tensors for the two inner products. Absent samples get
  // all-zero rows in both, so they contribute exactly 0.
  Tensor t_all(av.shape());
  Tensor hair_w(av.shape());
  for (int i = 0; i < n; ++i) {
    const AttentionTarget& tg = targets[static_cast<size_t>(i)];
    if (tg.absent) continue;
    if (tg.t_plus.height() != h || tg.t_plus.width() != w ||
        tg.hair_ds.height() != h || tg.hair_ds.width() != w) {
      throw ArgumentError(
          "attention_loss: target resolution does not match the attention "
          "map");
    }
    double hair_mass = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        hair_mass += tg.hair_ds.at(y, x);
      }
    }
    const double hair_denom = hair_mass + weights.epsilon;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        t_all.at4(i, 0, y, x) = tg.t_plus.at(y, x);
        hair_w.at4(i, 0, y, x) = tg.hair_ds.at(y, x) / hair_denom;
      }
    }
  }

  Var ce = nn::scale(tape, nn::log_inner_const(tape, a_hat, std::move(t_all)),
                     -1.0);
  Var neg = nn::scale(tape, nn::inner_const(tape, a_hat, std::move(hair_w)),
                      weights.lambda_neg);
  return nn::scale(tape, nn::add(tape, ce, neg), 1.0 / n);
}

Var id_loss(Tape& tape, Var id_logits,
            const std::vector<int>& identity_labels) {
  return nn::softmax_ce_mean(tape, id_logits, identity_labels);
}

Var triplet_loss(Tape& tape, Var embeddings_pre_bn,
                 const std::vector<int>& identity_labels, double margin) {
  if (margin < 0) {
    throw ArgumentError("triplet margin must be >= 0");
  }
  return nn::batch_hard_triplet(tape, embeddings_pre_bn, identity_labels,
                                margin);
}

CalLoss cal_loss(Tape& tape, Var clothes_logits_head, Var clothes_logits_adv,
                 const std::vector<int>& clothes_labels,
                 const std::vector<int>& identity_labels,
                 const std::map<int, std::vector<int>>& clothes_by_identity) {
  const Tensor& lv = tape.val(clothes_logits_adv);
  if (lv.ndim() != 2) {
    throw ArgumentError("cal_loss: logits must be [N, num_clothes]");
  }
  const int n = lv.dim(0), k = lv.dim(1);
  if (static_cast<int>(clothes_labels.size()) != n ||
      static_cast<int>(identity_labels.size()) != n) {
    throw ArgumentError("cal_loss: one clothes and identity label per row "
                        "required");
  }

  // Uniform target over the identity's OTHER clothes classes; identities
  // with a single class get an all-zero row (their adversarial term is 0).
  Tensor target(std::vector<int>{n, k});
  for (int i = 0; i < n; ++i) {
    const int identity = identity_labels[static_cast<size_t>(i)];
    const int clothes = clothes_labels[static_cast<size_t>(i)];
    const auto it = clothes_by_identity.find(identity);
    if (it == clothes_by_identity.end()) {
      throw ArgumentError("cal_loss: identity " + std::to_string(identity) +
                          " missing from the clothes map");
    }
    bool own_class_listed = false;
    int others = 0;
    for (int cls : it->second) {
      if (cls < 0 || cls >= k) {
        throw ArgumentError("cal_loss: clothes class " + std::to_string(cls) +
                            " out of range");
      }
      if (cls == clothes) {
        own_class_listed = true;
      } else {
        ++others;
      }
    }
    if (!own_class_listed) {
      throw ArgumentError("cal_loss: sample's clothes class " +
                          std::to_string(clothes) +
                          " is not listed for identity " +
                          std::to_string(identity));
    }
    if (others == 0) continue;
    const double mass = 1.0 / others;
    for (int cls : it->second) {
      if (cls != clothes) target.at2(i, cls) = mass;
    }
  }

  CalLoss out;
  out.classifier_term =
      nn::softmax_ce_mean(tape, clothes_logits_head, clothes_labels);
  out.adversarial_term =
      nn::softmax_ce_target_mean(tape, clothes_logits_adv, std::move(target));
  return out;
}

Var total_loss(Tape& tape, Var l_id, Var l_tri, Var l_att, Var l_cal,
               const LossWeights& weights) {
  weights.validate();
  const struct {
    Var v;
    const char* name;
  } terms[] = {{l_id, "identity classification"},
               {l_tri, "triplet"},
               {l_att, "attention"},
               {l_cal, "clothes-adversarial"}};
  for (const auto& term : terms) {
    const Tensor& value = tape.val(term.v);
    if (!value.is_scalar()) {
      throw ArgumentError(std::string("total_loss: ") + term.name +
                          " term is not a scalar");
    }
    if (!std::isfinite(value[0])) {
      throw NumericError(std::string("total_loss: ") + term.name +
                         " term is not finite");
    }
  }
  Var total = nn::add(tape, l_id, nn::scale(tape, l_tri, weights.lambda_tri));
  total = nn::add(tape, total, nn::scale(tape, l_att, weights.lambda_att));
  total = nn::add(tape, total, nn::scale(tape, l_cal, weights.lambda_cal));
  return total;
}

AttentionMass attention_mass(const SoftGrid& a, const SoftGrid& face_ds,
                             const SoftGrid& limbs_ds,
                             const SoftGrid& hair_ds) {
  check_grid_shapes(a, face_ds, "attention_mass");
  check_grid_shapes(a, limbs_ds, "attention_mass");
  check_grid_shapes(a, hair_ds, "attention_mass");
  AttentionMass mass;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      const double av = a.at(y, x);
      mass.hair += av * hair_ds.at(y, x);
      mass.positive +=
          av * (static_cast<double>(face_ds.at(y, x)) + limbs_ds.at(y, x));
    }
  }
  return mass;
}

}  // namespace msp
