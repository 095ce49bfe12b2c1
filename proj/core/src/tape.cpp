#include "cagnet/tape.hpp"

namespace cagnet {

const Tensor& GradStore::at(VarId id) const {
  check(contains(id), "no gradient recorded for var " + std::to_string(id));
  return grads_[id];
}

Tensor& GradStore::acc(VarId id, const Shape& s) {
  check(id >= 0 && static_cast<std::size_t>(id) < present_.size(),
        "gradient accumulator id out of range");
  if (!present_[id]) {
    grads_[id] = Tensor::zeros(s);
    present_[id] = 1;
  }
  return grads_[id];
}

VarId Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr});
  return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::record(Tensor value, std::vector<VarId> inputs, BackwardFn back) {
  for (VarId in : inputs) {
    check(in >= 0 && static_cast<std::size_t>(in) < nodes_.size(),
          "op input var " + std::to_string(in) + " is not on the tape");
  }
  nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(back)});
  return static_cast<VarId>(nodes_.size() - 1);
}

const Tensor& Tape::value(VarId id) const {
  check(id >= 0 && static_cast<std::size_t>(id) < nodes_.size(),
        "var " + std::to_string(id) + " is not on the tape");
  return nodes_[id].value;
}

GradStore Tape::backward(VarId loss) const {
  const Tensor& lv = value(loss);
  check(lv.size() == 1, "backward requires a scalar loss, got shape " +
                            lv.shape().str());
  GradStore grads(nodes_.size());
  grads.acc(loss, lv.shape())[0] = 1.0;
  for (VarId id = loss; id >= 0; --id) {
    const Node& node = nodes_[id];
    if (!node.back) continue;
    const Tensor* g = grads.find(id);
    if (!g) continue;  // not an ancestor of the loss
    node.back(*this, *g, grads);
  }
  return grads;
}

}  // namespace cagnet
