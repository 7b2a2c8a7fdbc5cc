#ifndef MSP_NN_OPS_HPP_
#define MSP_NN_OPS_HPP_

#include <vector>

#include "msp/nn/tape.hpp"

namespace msp::nn {

// ---------------------------------------------------------------------------
// Elementwise and structural ops
// ---------------------------------------------------------------------------

/// Elementwise sum of two same-shape tensors.
Var add(Tape& t, Var a, Var b);

/// x * s for a scalar constant s.
Var scale(Tape& t, Var a, double s);

Var relu(Tape& t, Var a);

/// Copies the value and cuts the gradient path.
Var detach(Tape& t, Var a);

/// Concatenates [N,C1] and [N,C2] along dim 1.
Var concat_cols(Tape& t, Var a, Var b);

// ---------------------------------------------------------------------------
// Convolution, pooling, linear, batch norm
// ---------------------------------------------------------------------------

/// x:[N,Ci,H,W] * w:[Co,Ci,kh,kw] + b:[Co] with zero padding. Pass an
/// invalid Var for b to omit the bias.
Var conv2d(Tape& t, Var x, Var w, Var b, int stride, int pad);

/// Max pooling with zero-ignoring window semantics: a window containing only
/// padding yields -inf-free behavior by taking the max over in-bounds pixels.
Var maxpool2d(Tape& t, Var x, int kernel, int stride, int pad);

/// [N,C,H,W] -> [N,C]; ties resolved to the first position in scan order.
Var global_max_pool(Tape& t, Var x);

/// [N,C,H,W] -> [N,C].
Var global_avg_pool(Tape& t, Var x);

/// x:[N,Ci] * w:[Co,Ci]^T + b:[Co]; invalid b omits the bias.
Var linear(Tape& t, Var x, Var w, Var b);

/// Running statistics owned by a model, updated in train mode.
struct BatchNormState {
  Tensor running_mean;  // [C]
  Tensor running_var;   // [C], biased convention throughout
  int64_t batches_seen = 0;
};

/// Batch normalization over [N,C] or [N,C,H,W] (per-channel statistics over
/// all other dims). Train mode normalizes with batch statistics (biased
/// variance) and, when update_running is set, folds them into the running
/// estimates with the given momentum. Eval mode normalizes with the running
/// estimates, which act as constants in the graph.
Var batchnorm(Tape& t, Var x, Var gamma, Var beta, BatchNormState& state,
              bool train, bool update_running, double momentum = 0.1,
              double eps = 1e-5);

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

/// Softmax over all spatial positions of each sample: s:[N,1,H,W] ->
/// a:[N,1,H,W] with per-sample sum 1. Max-subtracted for shift invariance.
/// Non-finite logits raise NumericError.
Var spatial_softmax(Tape& t, Var s);

/// f:[N,C,H,W] * a:[N,1,H,W] with a broadcast along channels.
Var gate(Tape& t, Var f, Var a);

// ---------------------------------------------------------------------------
// Reductions and loss kernels (scalar outputs)
// ---------------------------------------------------------------------------

/// sum(x * w) for a constant weight tensor w of the same shape.
Var inner_const(Tape& t, Var x, Tensor w);

/// sum(w * log(x)) for a constant weight tensor. Entries with w=0 are
/// skipped; entries with w!=0 require x>0 (NumericError otherwise).
Var log_inner_const(Tape& t, Var x, Tensor w);

/// Mean softmax cross-entropy of logits:[N,K] against integer labels.
Var softmax_ce_mean(Tape& t, Var logits, const std::vector<int>& labels);

/// (1/N) * sum_n -<target_n, log softmax(logits_n)> for a constant target
/// matrix [N,K]. All-zero target rows contribute exactly 0.
Var softmax_ce_target_mean(Tape& t, Var logits, Tensor target);

/// Batch-hard triplet loss on embeddings [N,D] with Euclidean distances:
/// mean over anchors of hinge(margin + hardest-positive - hardest-negative).
/// Anchors lacking a positive or a negative are skipped; a batch where no
/// anchor qualifies yields constant 0 and a warning on stderr.
Var batch_hard_triplet(Tape& t, Var emb, const std::vector<int>& labels,
                       double margin);

}  // namespace msp::nn

#endif  // MSP_NN_OPS_HPP_
