#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cagnet {

// All tensors are rank-4 (n, c, h, w), row-major with w fastest.
// Vectors and scalars use size-1 dimensions; a scalar is (1,1,1,1).
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  Shape() = default;
  Shape(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {}

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  bool valid() const { return n > 0 && c > 0 && h > 0 && w > 0; }
  bool operator==(const Shape& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }
  std::string str() const;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(const Shape& s);

  static Tensor zeros(const Shape& s) { return Tensor(s); }
  static Tensor full(const Shape& s, double v);
  static Tensor scalar(double v);
  static Tensor from_values(const Shape& s, std::vector<double> v);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::size_t index(int in, int ic, int iy, int ix) const {
    return ((static_cast<std::size_t>(in) * shape_.c + ic) * shape_.h + iy) *
               shape_.w +
           ix;
  }
  double& at(int in, int ic, int iy, int ix) {
    return data_[index(in, ic, iy, ix)];
  }
  double at(int in, int ic, int iy, int ix) const {
    return data_[index(in, ic, iy, ix)];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  void fill(double v);

  // Element count must be preserved; layout is untouched.
  void reshape(const Shape& s);

  bool all_finite() const;

 private:
  Shape shape_{0, 0, 0, 0};
  std::vector<double> data_;
};

// Throws std::invalid_argument with `what` if `cond` is false.
void check(bool cond, const std::string& what);

}  // namespace cagnet
