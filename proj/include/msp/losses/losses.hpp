#ifndef MSP_LOSSES_LOSSES_HPP_
#define MSP_LOSSES_LOSSES_HPP_

#include <map>
#include <vector>

#include "msp/core/grid.hpp"
#include "msp/nn/ops.hpp"
#include "msp/nn/tape.hpp"

namespace msp {

/// Weights of the combined objective
///   L = L_id + lambda_tri * L_tri + lambda_att * L_att + lambda_cal * L_cal
/// plus the attention-loss internals (lambda_neg, epsilon).
struct LossWeights {
  double lambda_tri = 1.0;
  double lambda_att = 1.0;
  double lambda_cal = 0.5;
  double lambda_neg = 1.0;
  double epsilon = 1e-6;

  void validate() const;
};

/// Supervision for one sample's attention map at feature resolution.
struct AttentionTarget {
  SoftGrid t_plus;   // normalized positive target; sums to ~1 unless absent
  SoftGrid hair_ds;  // downsampled hair mask, used by the penalty term
  bool absent = false;  // no positive mask mass: the loss term is omitted
};

/// Builds the normalized positive target
///   t_plus = (face_ds + limbs_ds) / (sum(face_ds + limbs_ds) + epsilon)
/// and attaches the downsampled hair mask for the penalty term. All-zero
/// positives yield an all-zero target flagged absent.
AttentionTarget attention_target(const SoftGrid& face_ds,
                                 const SoftGrid& limbs_ds,
                                 const SoftGrid& hair_ds, double epsilon);

/// Mean over the batch of per-sample attention losses
///   -<t_plus, log A> + lambda_neg * <A, hair_ds> / (sum(hair_ds) + epsilon);
/// samples flagged absent contribute exactly 0. a_hat is [N,1,H,W] with one
/// target per batch row.
nn::Var attention_loss(nn::Tape& tape, nn::Var a_hat,
                       const std::vector<AttentionTarget>& targets,
                       const LossWeights& weights);

/// Mean softmax cross-entropy of the identity logits.
nn::Var id_loss(nn::Tape& tape, nn::Var id_logits,
                const std::vector<int>& identity_labels);

/// Batch-hard triplet loss on pre-BN embeddings (Euclidean distances).
/// Degenerate batches (no anchor with both a positive and a negative)
/// contribute 0 with a warning.
nn::Var triplet_loss(nn::Tape& tape, nn::Var embeddings_pre_bn,
                     const std::vector<int>& identity_labels, double margin);

/// The two coupled clothes-adversarial terms. classifier_term trains the
/// clothes head on clothes labels over a detached backbone; adversarial_term
/// — the value reported as L_cal and weighted by lambda_cal — pushes
/// backbone features toward the uniform distribution over the identity's
/// OTHER clothes classes, with the head frozen. The two logits arguments
/// are the corresponding gradient paths from the model's forward pass.
struct CalLoss {
  nn::Var classifier_term;
  nn::Var adversarial_term;
};

CalLoss cal_loss(nn::Tape& tape, nn::Var clothes_logits_head,
                 nn::Var clothes_logits_adv,
                 const std::vector<int>& clothes_labels,
                 const std::vector<int>& identity_labels,
                 const std::map<int, std::vector<int>>& clothes_by_identity);

/// L = l_id + lambda_tri*l_tri + lambda_att*l_att + lambda_cal*l_cal.
/// A non-finite component raises NumericError naming the offending term.
nn::Var total_loss(nn::Tape& tape, nn::Var l_id, nn::Var l_tri, nn::Var l_att,
                   nn::Var l_cal, const LossWeights& weights);

/// Diagnostic inner products of one attention map with region masks:
/// mass.hair = <a, hair_ds>, mass.positive = <a, face_ds + limbs_ds>.
struct AttentionMass {
  double hair = 0;
  double positive = 0;
};

AttentionMass attention_mass(const SoftGrid& a, const SoftGrid& face_ds,
                             const SoftGrid& limbs_ds,
                             const SoftGrid& hair_ds);

}  // namespace msp

#endif  // MSP_LOSSES_LOSSES_HPP_
