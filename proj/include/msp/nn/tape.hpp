#ifndef MSP_NN_TAPE_HPP_
#define MSP_NN_TAPE_HPP_

#include <functional>
#include <vector>

#include "msp/core/error.hpp"
#include "msp/nn/tensor.hpp"

namespace msp::nn {

/// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode autodiff tape. Nodes are appended in forward order (which is
/// therefore a topological order); backward() walks them in reverse, each
/// node's closure scattering its gradient into its parents. A fresh tape is
/// built per training step; leaves carry parameter and input values.
class Tape {
 public:
  /// Leaf node: no backward closure. Gradients still accumulate into it so
  /// parameters can be read back after backward().
  Var leaf(Tensor value) {
    nodes_.push_back(Node{std::move(value), Tensor(), nullptr});
    nodes_.back().grad = Tensor(nodes_.back().value.shape());
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  /// Interior node produced by an op; `backward` receives the tape and the
  /// node's own handle, reads grad(self), and accumulates into its parents'
  /// gradients.
  Var node(Tensor value, std::function<void(Tape&, Var)> backward) {
    nodes_.push_back(Node{std::move(value), Tensor(), std::move(backward)});
    nodes_.back().grad = Tensor(nodes_.back().value.shape());
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor& val(Var v) const { return at(v).value; }
  Tensor& grad(Var v) { return at(v).grad; }
  const Tensor& grad(Var v) const { return at(v).grad; }

  /// Seeds d(loss)/d(loss) = 1 and runs every node's backward closure in
  /// reverse creation order.
  void backward(Var loss) {
    if (!at(loss).value.is_scalar()) {
      throw ArgumentError("backward() expects a scalar loss, got shape " +
                          at(loss).value.shape_str());
    }
    at(loss).grad[0] = 1.0;
    for (int i = loss.id; i >= 0; --i) {
      if (nodes_[static_cast<size_t>(i)].backward) {
        nodes_[static_cast<size_t>(i)].backward(*this, Var{i});
      }
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&, Var)> backward;
  };

  Node& at(Var v) {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
      throw ArgumentError("invalid tape handle");
    }
    return nodes_[static_cast<size_t>(v.id)];
  }
  const Node& at(Var v) const {
    return const_cast<Tape*>(this)->at(v);
  }

  std::vector<Node> nodes_;
};

}  // namespace msp::nn

#endif  // MSP_NN_TAPE_HPP_
