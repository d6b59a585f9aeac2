#include "ctxnmt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ctxnmt {

std::size_t shape_size(const Shape& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must have rank >= 1");
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive, got " + shape_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

template <typename Real>
Tensor<Real>::Tensor(Shape s, bool needs_grad)
    : shape(std::move(s)), data(shape_size(shape), Real(0)), requires_grad(needs_grad) {
  if (requires_grad) grad.assign(data.size(), Real(0));
}

template <typename Real>
Tensor<Real>::Tensor(Shape s, std::vector<Real> values, bool needs_grad)
    : shape(std::move(s)), data(std::move(values)), requires_grad(needs_grad) {
  if (shape_size(shape) != data.size()) {
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_string(shape));
  }
  if (requires_grad) grad.assign(data.size(), Real(0));
}

template <typename Real>
Tensor<Real> Tensor<Real>::uniform(Shape s, double lo, double hi, Rng& rng, bool needs_grad) {
  Tensor t(std::move(s), needs_grad);
  for (auto& v : t.data) v = static_cast<Real>(rng.uniform(lo, hi));
  return t;
}

template <typename Real>
void Tensor<Real>::zero_grad() {
  grad.assign(data.size(), Real(0));
}

template <typename Real>
bool Tensor<Real>::all_finite() const {
  auto finite = [](Real v) { return std::isfinite(v); };
  return std::all_of(data.begin(), data.end(), finite) && std::all_of(grad.begin(), grad.end(), finite);
}

template <typename Real>
void softmax_inplace(std::span<Real> row) {
  if (row.empty()) return;
  Real peak = row[0];
  for (Real v : row) {
    if (!std::isfinite(v)) throw std::domain_error("softmax: non-finite input");
    peak = std::max(peak, v);
  }
  Real total = 0;
  for (Real& v : row) {
    v = std::exp(v - peak);
    total += v;
  }
  for (Real& v : row) v /= total;
}

template <typename Real>
Tensor<Real> softmax(const Tensor<Real>& logits) {
  if (logits.shape.size() > 2) throw std::invalid_argument("softmax: expects rank 1 or 2");
  Tensor<Real> out(logits.shape, logits.data);
  const std::size_t width = logits.shape.size() == 1 ? logits.size() : static_cast<std::size_t>(logits.shape[1]);
  for (std::size_t start = 0; start < out.size(); start += width) {
    softmax_inplace(std::span<Real>(out.data).subspan(start, width));
  }
  return out;
}

template struct Tensor<float>;
template struct Tensor<double>;
template Tensor<float> softmax(const Tensor<float>&);
template Tensor<double> softmax(const Tensor<double>&);
template void softmax_inplace(std::span<float>);
template void softmax_inplace(std::span<double>);

}  // namespace ctxnmt
