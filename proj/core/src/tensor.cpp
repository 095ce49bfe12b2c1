#include "cagnet/tensor.hpp"

#include <cmath>
#include <sstream>

namespace cagnet {

std::string Shape::str() const {
  std::ostringstream os;
  os << "(" << n << "," << c << "," << h << "," << w << ")";
  return os.str();
}

Tensor::Tensor(const Shape& s) : shape_(s) {
  check(s.valid(), "tensor shape must be positive, got " + s.str());
  data_.assign(s.numel(), 0.0);
}

Tensor Tensor::full(const Shape& s, double v) {
  Tensor t(s);
  t.fill(v);
  return t;
}

Tensor Tensor::scalar(double v) { return full(Shape(1, 1, 1, 1), v); }

Tensor Tensor::from_values(const Shape& s, std::vector<double> v) {
  check(s.valid(), "tensor shape must be positive, got " + s.str());
  check(v.size() == s.numel(), "value count " + std::to_string(v.size()) +
                                   " does not match shape " + s.str());
  Tensor t;
  t.shape_ = s;
  t.data_ = std::move(v);
  return t;
}

void Tensor::fill(double v) {
  for (auto& x : data_) x = v;
}

void Tensor::reshape(const Shape& s) {
  check(s.valid() && s.numel() == data_.size(),
        "reshape " + shape_.str() + " -> " + s.str() +
            " must preserve element count");
  shape_ = s;
}

bool Tensor::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void check(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace cagnet
