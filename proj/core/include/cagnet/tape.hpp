#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cagnet/tensor.hpp"

namespace cagnet {

using VarId = std::int32_t;

class Tape;

// Gradients keyed by VarId. A slot only exists once something has been
// accumulated into it; reading an absent slot is an error, probing is not.
class GradStore {
 public:
  explicit GradStore(std::size_t n) : grads_(n), present_(n, 0) {}

  bool contains(VarId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < present_.size() &&
           present_[id];
  }
  const Tensor& at(VarId id) const;
  const Tensor* find(VarId id) const {
    return contains(id) ? &grads_[id] : nullptr;
  }

  // Zero-initialised accumulator, created on first touch.
  Tensor& acc(VarId id, const Shape& s);

 private:
  std::vector<Tensor> grads_;
  std::vector<char> present_;
};

// Append-only record of one forward computation. Node i may only consume
// nodes < i, so walking the tape backwards is already a topological order.
class Tape {
 public:
  using BackwardFn =
      std::function<void(const Tape&, const Tensor& gout, GradStore&)>;

  VarId leaf(Tensor value);
  VarId record(Tensor value, std::vector<VarId> inputs, BackwardFn back);

  const Tensor& value(VarId id) const;
  const Shape& shape(VarId id) const { return value(id).shape(); }
  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a scalar loss. Every node on the loss's dependency
  // path gets a gradient; each backward rule fires exactly once.
  GradStore backward(VarId loss) const;

 private:
  struct Node {
    Tensor value;
    std::vector<VarId> inputs;
    BackwardFn back;
  };
  std::vector<Node> nodes_;
};

}  // namespace cagnet
