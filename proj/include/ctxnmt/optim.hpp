#pragma once

#include <span>
#include <vector>

#include "ctxnmt/tensor.hpp"

namespace ctxnmt {

// accumulator += g^2; param -= lr * g / (sqrt(accumulator) + delta)
template <typename Real>
class AdaGrad {
 public:
  explicit AdaGrad(double learning_rate = 0.01, double delta = 1e-8);

  // Applies one update from each tensor's grad buffer. The parameter list must
  // keep the same order and shapes across calls.
  void step(std::span<Tensor<Real>* const> params);

  double learning_rate() const { return learning_rate_; }
  const std::vector<std::vector<Real>>& accumulators() const { return accumulators_; }

 private:
  double learning_rate_;
  double delta_;
  std::vector<std::vector<Real>> accumulators_;
};

// L2 norm over all gradient buffers.
template <typename Real>
double global_grad_norm(std::span<Tensor<Real>* const> params);

// Rescales gradients so the global norm is at most max_norm. Returns the norm
// before clipping.
template <typename Real>
double clip_grad_norm(std::span<Tensor<Real>* const> params, double max_norm);

extern template class AdaGrad<float>;
extern template class AdaGrad<double>;

}  // namespace ctxnmt
