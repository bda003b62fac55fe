#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pushrel/error.hpp"

namespace pushrel {

// Dense row-major matrix of doubles. The whole numeric stack runs on this
// one type; vectors are 1xN or Nx1 tensors.
struct Tensor2 {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  static Tensor2 zeros(int r, int c) { return Tensor2(r, c); }

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(0.0); }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  // NaN/Inf anywhere is an error state; callers invoke this at stage
  // boundaries rather than after every op.
  void check_finite(const std::string& what) const {
    if (!all_finite()) fail("non-finite values in " + what);
  }
};

// c += a * b
void matmul_acc(const Tensor2& a, const Tensor2& b, Tensor2& c);
// c += a^T * b
void matmul_at_acc(const Tensor2& a, const Tensor2& b, Tensor2& c);
// c += a * b^T
void matmul_bt_acc(const Tensor2& a, const Tensor2& b, Tensor2& c);

Tensor2 matmul(const Tensor2& a, const Tensor2& b);

// Adds a 1xN bias row to every row of t.
void add_bias_rows(Tensor2& t, const Tensor2& bias);
// bias_grad += column sums of g.
void sum_rows_acc(const Tensor2& g, Tensor2& bias_grad);

void relu_inplace(Tensor2& t);
// Zeroes grad entries where the forward post-activation was <= 0.
void relu_backward_inplace(const Tensor2& post, Tensor2& grad);

}  // namespace pushrel
