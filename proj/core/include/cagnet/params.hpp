#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "cagnet/tape.hpp"
#include "cagnet/tensor.hpp"

namespace cagnet {

// Named tensors in insertion order. Creation order is part of the model
// contract: serialisation, optimiser state and RNG draws all walk it.
class ParamStore {
 public:
  Tensor& create(const std::string& name, Tensor init) {
    check(!map_.count(name), "duplicate parameter " + name);
    order_.push_back(name);
    return map_[name] = std::move(init);
  }
  bool contains(const std::string& name) const { return map_.count(name) > 0; }
  Tensor& at(const std::string& name) {
    auto it = map_.find(name);
    check(it != map_.end(), "unknown parameter " + name);
    return it->second;
  }
  const Tensor& at(const std::string& name) const {
    auto it = map_.find(name);
    check(it != map_.end(), "unknown parameter " + name);
    return it->second;
  }
  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }
  std::size_t total_elems() const {
    std::size_t n = 0;
    for (const auto& name : order_) n += map_.at(name).size();
    return n;
  }

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> map_;
};

// Element counts split by parameter role, derived from the name suffix.
struct ParamCount {
  std::size_t weights = 0;
  std::size_t biases = 0;
  std::size_t norm = 0;
  std::size_t total() const { return weights + biases + norm; }
  ParamCount& operator+=(const ParamCount& o) {
    weights += o.weights;
    biases += o.biases;
    norm += o.norm;
    return *this;
  }
};

inline ParamCount classify_params(const ParamStore& ps,
                                  const std::string& prefix = "") {
  ParamCount out;
  for (const auto& name : ps.names()) {
    if (name.rfind(prefix, 0) != 0) continue;
    const std::size_t sz = ps.at(name).size();
    if (name.ends_with(".weight"))
      out.weights += sz;
    else if (name.ends_with(".bias"))
      out.biases += sz;
    else if (name.ends_with(".gamma") || name.ends_with(".beta"))
      out.norm += sz;
    else
      check(false, "parameter " + name + " has no recognised role suffix");
  }
  return out;
}

// Binds parameter/buffer stores to one tape for a single forward pass.
struct Forward {
  Forward(Tape& t, ParamStore& p, ParamStore* b = nullptr,
          bool train = false, bool unit_guides = false)
      : tape(t), params(p), buffers(b), training(train),
        force_unit_guides(unit_guides) {}

  Tape& tape;
  ParamStore& params;
  ParamStore* buffers = nullptr;
  bool training = false;
  bool force_unit_guides = false;  // test hook: guide gates act as identity

  // Ordered so that walking bound vars is reproducible.
  std::map<std::string, VarId> bound;

  VarId use(const std::string& name) {
    auto it = bound.find(name);
    if (it != bound.end()) return it->second;
    const VarId id = tape.leaf(params.at(name));
    bound.emplace(name, id);
    return id;
  }
};

}  // namespace cagnet
