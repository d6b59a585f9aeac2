#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ctxnmt/rng.hpp"

namespace ctxnmt {

using Shape = std::vector<int>;

// Product of dimensions. Throws std::invalid_argument on empty or
// non-positive dimensions.
std::size_t shape_size(const Shape& shape);

std::string shape_string(const Shape& shape);

// Dense row-major array. Learnable weights carry a gradient buffer of the
// same length once `requires_grad` is set.
template <typename Real>
struct Tensor {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;
  bool requires_grad = false;

  Tensor() = default;
  explicit Tensor(Shape s, bool needs_grad = false);
  Tensor(Shape s, std::vector<Real> values, bool needs_grad = false);

  static Tensor uniform(Shape s, double lo, double hi, Rng& rng, bool needs_grad = true);

  std::size_t size() const { return data.size(); }
  int rows() const { return shape.empty() ? 0 : shape.front(); }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  void zero_grad();
  bool all_finite() const;
};

extern template struct Tensor<float>;
extern template struct Tensor<double>;

// Numerically stable softmax over a rank-1 tensor or each row of a rank-2
// tensor. Throws std::domain_error on non-finite input.
template <typename Real>
Tensor<Real> softmax(const Tensor<Real>& logits);

template <typename Real>
void softmax_inplace(std::span<Real> row);

}  // namespace ctxnmt
