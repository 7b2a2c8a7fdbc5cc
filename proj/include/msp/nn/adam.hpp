#ifndef MSP_NN_ADAM_HPP_
#define MSP_NN_ADAM_HPP_

#include <cstdint>
#include <map>
#include <string>

#include "msp/nn/tensor.hpp"

namespace msp::nn {

/// Adam with L2 weight decay folded into the gradient (the convention of
/// mainstream re-id codebases). State is keyed by parameter name; iteration
/// over the (ordered) maps makes the update order deterministic.
class Adam {
 public:
  Adam(double lr, double weight_decay, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2),
        eps_(eps) {}

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

  /// One update over all named parameters. Missing state slots are created
  /// zero-initialized on first use.
  void step(std::map<std::string, Tensor>& params,
            const std::map<std::string, Tensor>& grads);

  int64_t steps_taken() const { return t_; }

  // Serialized by checkpoints.
  std::map<std::string, Tensor>& first_moments() { return m_; }
  std::map<std::string, Tensor>& second_moments() { return v_; }
  void set_steps_taken(int64_t t) { t_ = t; }

 private:
  double lr_;
  double weight_decay_;
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
};

}  // namespace msp::nn

#endif  // MSP_NN_ADAM_HPP_
