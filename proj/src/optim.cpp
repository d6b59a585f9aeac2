#include "ctxnmt/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace ctxnmt {

template <typename Real>
AdaGrad<Real>::AdaGrad(double learning_rate, double delta) : learning_rate_(learning_rate), delta_(delta) {
  if (!(learning_rate > 0)) throw std::invalid_argument("AdaGrad: learning rate must be positive");
}

template <typename Real>
void AdaGrad<Real>::step(std::span<Tensor<Real>* const> params) {
  if (accumulators_.empty()) {
    for (auto* p : params) accumulators_.emplace_back(p->size(), Real(0));
  }
  if (accumulators_.size() != params.size()) throw std::invalid_argument("AdaGrad: parameter list changed");
  const Real lr = static_cast<Real>(learning_rate_);
  const Real delta = static_cast<Real>(delta_);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<Real>& p = *params[k];
    auto& acc = accumulators_[k];
    if (acc.size() != p.size()) throw std::invalid_argument("AdaGrad: shape mismatch for parameter " + std::to_string(k));
    if (p.grad.empty()) continue;
    if (p.grad.size() != p.size()) throw std::invalid_argument("AdaGrad: gradient shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const Real g = p.grad[i];
      if (g == Real(0)) continue;
      acc[i] += g * g;
      p.data[i] -= lr * g / (std::sqrt(acc[i]) + delta);
    }
  }
}

template <typename Real>
double global_grad_norm(std::span<Tensor<Real>* const> params) {
  double total = 0;
  for (auto* p : params)
    for (Real g : p->grad) total += static_cast<double>(g) * static_cast<double>(g);
  return std::sqrt(total);
}

template <typename Real>
double clip_grad_norm(std::span<Tensor<Real>* const> params, double max_norm) {
  const double norm = global_grad_norm<Real>(params);
  if (!std::isfinite(norm)) throw std::domain_error("gradient norm is not finite");
  if (norm > max_norm && norm > 0) {
    const Real factor = static_cast<Real>(max_norm / norm);
    for (auto* p : params)
      for (Real& g : p->grad) g *= factor;
  }
  return norm;
}

template class AdaGrad<float>;
template class AdaGrad<double>;
template double global_grad_norm<float>(std::span<Tensor<float>* const>);
template double global_grad_norm<double>(std::span<Tensor<double>* const>);
template double clip_grad_norm<float>(std::span<Tensor<float>* const>, double);
template double clip_grad_norm<double>(std::span<Tensor<double>* const>, double);

}  // namespace ctxnmt
