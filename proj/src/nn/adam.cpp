#include "msp/nn/adam.hpp"

#include <cmath>

#include "msp/core/error.hpp"

namespace msp::nn {

void Adam::step(std::map<std::string, Tensor>& params,
                const std::map<std::string, Tensor>& grads) {
  t_ += 1;
  const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));

  for (auto& [name, p] : params) {
    const auto git = grads.find(name);
    if (git == grads.end()) {
      throw ArgumentError("Adam: no gradient provided for parameter '" +
                          name + "'");
    }
    const Tensor& g = git->second;
    if (!g.same_shape(p)) {
      throw ArgumentError("Adam: gradient shape mismatch for '" + name + "'");
    }
    Tensor& m = m_.try_emplace(name, Tensor(p.shape())).first->second;
    Tensor& v = v_.try_emplace(name, Tensor(p.shape())).first->second;

    for (int64_t i = 0; i < p.numel(); ++i) {
      const double gi = g[i] + weight_decay_ * p[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      const double mhat = m[i] / bias1;
      const double vhat = v[i] / bias2;
      p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace msp::nn
