#include "ctxnmt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ctxnmt {

namespace {

template <typename Real>
Real sigmoid_of(Real x) {
  return Real(1) / (Real(1) + std::exp(-x));
}

template <typename Real>
void ensure_param_grad(Tensor<Real>& p) {
  if (p.grad.size() != p.data.size()) p.grad.assign(p.data.size(), Real(0));
}

}  // namespace

template <typename Real>
typename Graph<Real>::Node& Graph<Real>::node(Var v) {
  if (!v.valid() || v.id >= nodes_.size()) throw std::out_of_range("Graph: invalid Var");
  return nodes_[v.id];
}

template <typename Real>
const typename Graph<Real>::Node& Graph<Real>::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw std::out_of_range("Graph: invalid Var");
  return nodes_[v.id];
}

template <typename Real>
Var Graph<Real>::push(Shape shape, std::vector<Real> value, bool needs_grad) {
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(value);
  n.needs_grad = grad_enabled_ && needs_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename Real>
std::vector<Real>& Graph<Real>::grad_of(Var v) {
  Node& n = node(v);
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), Real(0));
  return n.grad;
}

template <typename Real>
void Graph<Real>::require_same_shape(Var a, Var b, const char* op) const {
  if (shape(a) != shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(shape(a)) + " vs " +
                                shape_string(shape(b)));
  }
}

template <typename Real>
int Graph<Real>::cols(Var v) const {
  const Shape& s = node(v).shape;
  return s.size() < 2 ? static_cast<int>(node(v).value.size()) : s[1];
}

template <typename Real>
Real Graph<Real>::scalar(Var v) const {
  const Node& n = node(v);
  if (n.value.size() != 1) throw std::invalid_argument("Graph::scalar: tensor is not a scalar");
  return n.value[0];
}

template <typename Real>
Var Graph<Real>::constant(Shape shape, std::vector<Real> values) {
  if (shape_size(shape) != values.size()) throw std::invalid_argument("Graph::constant: data/shape mismatch");
  return push(std::move(shape), std::move(values), false);
}

template <typename Real>
Var Graph<Real>::zeros(Shape shape) {
  const std::size_t n = shape_size(shape);
  return push(std::move(shape), std::vector<Real>(n, Real(0)), false);
}

template <typename Real>
Var Graph<Real>::parameter(Tensor<Real>& param) {
  shape_size(param.shape);
  const bool needs = grad_enabled_ && param.requires_grad;
  Var out = push(param.shape, param.data, needs);
  if (needs) {
    ensure_param_grad(param);
    Tensor<Real>* target = &param;
    node(out).backprop = [this, out, target] {
      const auto& g = nodes_[out.id].grad;
      for (std::size_t i = 0; i < g.size(); ++i) target->grad[i] += g[i];
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::add(Var a, Var b) {
  require_same_shape(a, b, "add");
  std::vector<Real> v(value(a).begin(), value(a).end());
  auto vb = value(b);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += vb[i];
  Var out = push(shape(a), std::move(v), tracking(a) || tracking(b));
  if (node(out).needs_grad) {
    node(out).backprop = [this, out, a, b] {
      const auto& g = nodes_[out.id].grad;
      if (tracking(a)) {
        auto& ga = grad_of(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (tracking(b)) {
        auto& gb = grad_of(b);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  std::vector<Real> v(value(a).begin(), value(a).end());
  auto vb = value(b);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= vb[i];
  Var out = push(shape(a), std::move(v), tracking(a) || tracking(b));
  if (node(out).needs_grad) {
    node(out).backprop = [this, out, a, b] {
      const auto& g = nodes_[out.id].grad;
      if (tracking(a)) {
        auto& ga = grad_of(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (tracking(b)) {
        auto& gb = grad_of(b);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  auto va = value(a);
  auto vb = value(b);
  std::vector<Real> v(va.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = va[i] * vb[i];
  Var out = push(shape(a), std::move(v), tracking(a) || tracking(b));
  if (node(out).needs_grad) {
    node(out).backprop = [this, out, a, b] {
      const auto& g = nodes_[out.id].grad;
      auto va = value(a);
      auto vb = value(b);
      if (tracking(a)) {
        auto& ga = grad_of(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
      }
      if (tracking(b)) {
        auto& gb = grad_of(b);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
      }
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::scale(Var a, Real factor) {
  std::vector<Real> v(value(a).begin(), value(a).end());
  for (auto& x : v) x *= factor;
  Var out = push(shape(a), std::move(v), tracking(a));
  if (node(out).needs_grad) {
    node(out).backprop = [this, out, a, factor] {
      const auto& g = nodes_[out.id].grad;
      auto& ga = grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::sigmoid(Var a) {
  std::vector<Real> v(value(a).begin(), value(a).end());
  for (auto& x : v) x = sigmoid_of(x);
  Var out = push(shape(a), std::move(v), tracking(a));
  if (node(out).needs_grad) {
    node(out).backprop = [this, out, a] {
      const auto& n = nodes_[out.id];
      auto& ga = grad_of(a);
      for (std::size_t i = 0; i < n.grad.size(); ++i) ga[i] += n.grad[i] * n.value[i] * (Real(1) - n.value[i]);
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::tanh(Var a) {
  std::vector<Real> v(value(a).begin(), value(a).end());
  for (auto& x : v) x = std::tanh(x);
  Var out = push(shape(a), std::move(v), tracking(a));
  if (node(out).needs_grad) {
    node(out).backprop = [this, out, a] {
      const auto& n = nodes_[out.id];
      auto& ga = grad_of(a);
      for (std::size_t i = 0; i < n.grad.size(); ++i) ga[i] += n.grad[i] * (Real(1) - n.value[i] * n.value[i]);
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::sum(Var a) {
  Real total = 0;
  for (Real x : value(a)) total += x;
  Var out = push(Shape{1}, {total}, tracking(a));
  if (node(out).needs_grad) {
    node(out).backprop = [this, out, a] {
      const Real g = nodes_[out.id].grad[0];
      for (auto& x : grad_of(a)) x += g;
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::dot(Var a, Var b) {
  if (value(a).size() != value(b).size()) throw std::invalid_argument("dot: length mismatch");
  auto va = value(a);
  auto vb = value(b);
  Real total = 0;
  for (std::size_t i = 0; i < va.size(); ++i) total += va[i] * vb[i];
  Var out = push(Shape{1}, {total}, tracking(a) || tracking(b));
  if (node(out).needs_grad) {
    node(out).backprop = [this, out, a, b] {
      const Real g = nodes_[out.id].grad[0];
      auto va = value(a);
      auto vb = value(b);
      if (tracking(a)) {
        auto& ga = grad_of(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * vb[i];
      }
      if (tracking(b)) {
        auto& gb = grad_of(b);
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * va[i];
      }
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::matmul(Var a, Var b) {
  if (shape(a).size() != 2 || shape(b).size() != 2 || shape(a)[1] != shape(b)[0]) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_string(shape(a)) + " and " +
                                shape_string(shape(b)));
  }
  const int m = shape(a)[0], k = shape(a)[1], n = shape(b)[1];
  auto va = value(a);
  auto vb = value(b);
  std::vector<Real> v(static_cast<std::size_t>(m) * n, Real(0));
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < k; ++p) {
      const Real aip = va[i * k + p];
      for (int j = 0; j < n; ++j) v[i * n + j] += aip * vb[p * n + j];
    }
  }
  Var out = push(Shape{m, n}, std::move(v), tracking(a) || tracking(b));
  if (node(out).needs_grad) {
    node(out).backprop = [this, out, a, b, m, k, n] {
      const auto& g = nodes_[out.id].grad;
      auto va = value(a);
      auto vb = value(b);
      if (tracking(a)) {
        auto& ga = grad_of(a);
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            Real acc = 0;
            for (int j = 0; j < n; ++j) acc += g[i * n + j] * vb[p * n + j];
            ga[i * k + p] += acc;
          }
      }
      if (tracking(b)) {
        auto& gb = grad_of(b);
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            const Real aip = va[i * k + p];
            for (int j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
          }
      }
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::linear(Var x, Tensor<Real>& weight) {
  if (weight.shape.size() != 2 || cols(x) != weight.shape[1] || shape(x).size() != 2) {
    throw std::invalid_argument("linear: input " + shape_string(shape(x)) + " vs weight " +
                                shape_string(weight.shape));
  }
  const int batch = shape(x)[0], in = weight.shape[1], outd = weight.shape[0];
  auto vx = value(x);
  const Real* w = weight.data.data();
  std::vector<Real> v(static_cast<std::size_t>(batch) * outd);
  for (int b = 0; b < batch; ++b) {
    const Real* xr = vx.data() + static_cast<std::size_t>(b) * in;
    for (int o = 0; o < outd; ++o) {
      const Real* wr = w + static_cast<std::size_t>(o) * in;
      Real acc = 0;
      for (int i = 0; i < in; ++i) acc += xr[i] * wr[i];
      v[static_cast<std::size_t>(b) * outd + o] = acc;
    }
  }
  const bool wants_w = grad_enabled_ && weight.requires_grad;
  Var out = push(Shape{batch, outd}, std::move(v), tracking(x) || wants_w);
  if (node(out).needs_grad) {
    if (wants_w) ensure_param_grad(weight);
    Tensor<Real>* wt = &weight;
    node(out).backprop = [this, out, x, wt, wants_w, batch, in, outd] {
      const auto& g = nodes_[out.id].grad;
      auto vx = value(x);
      if (tracking(x)) {
        auto& gx = grad_of(x);
        for (int b = 0; b < batch; ++b) {
          Real* gxr = gx.data() + static_cast<std::size_t>(b) * in;
          for (int o = 0; o < outd; ++o) {
            const Real go = g[static_cast<std::size_t>(b) * outd + o];
            if (go == Real(0)) continue;
            const Real* wr = wt->data.data() + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) gxr[i] += go * wr[i];
          }
        }
      }
      if (wants_w) {
        for (int b = 0; b < batch; ++b) {
          const Real* xr = vx.data() + static_cast<std::size_t>(b) * in;
          for (int o = 0; o < outd; ++o) {
            const Real go = g[static_cast<std::size_t>(b) * outd + o];
            if (go == Real(0)) continue;
            Real* gw = wt->grad.data() + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) gw[i] += go * xr[i];
          }
        }
      }
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::add_bias(Var x, Tensor<Real>& bias) {
  const int width = cols(x);
  if (static_cast<int>(bias.size()) != width) throw std::invalid_argument("add_bias: width mismatch");
  std::vector<Real> v(value(x).begin(), value(x).end());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += bias.data[i % width];
  const bool wants_b = grad_enabled_ && bias.requires_grad;
  Var out = push(shape(x), std::move(v), tracking(x) || wants_b);
  if (node(out).needs_grad) {
    if (wants_b) ensure_param_grad(bias);
    Tensor<Real>* bt = &bias;
    node(out).backprop = [this, out, x, bt, wants_b, width] {
      const auto& g = nodes_[out.id].grad;
      if (tracking(x)) {
        auto& gx = grad_of(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (wants_b) {
        for (std::size_t i = 0; i < g.size(); ++i) bt->grad[i % width] += g[i];
      }
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::embedding(Tensor<Real>& table, std::span<const int> ids) {
  if (table.shape.size() != 2) throw std::invalid_argument("embedding: table must be rank 2");
  const int vocab = table.shape[0], dim = table.shape[1];
  const int n = static_cast<int>(ids.size());
  std::vector<Real> v(static_cast<std::size_t>(n) * dim);
  for (int r = 0; r < n; ++r) {
    if (ids[r] < 0 || ids[r] >= vocab) {
      throw std::out_of_range("embedding: id " + std::to_string(ids[r]) + " outside vocabulary of " +
                              std::to_string(vocab));
    }
    std::copy_n(table.data.begin() + static_cast<std::ptrdiff_t>(ids[r]) * dim, dim,
                v.begin() + static_cast<std::ptrdiff_t>(r) * dim);
  }
  const bool wants = grad_enabled_ && table.requires_grad;
  Var out = push(Shape{n, dim}, std::move(v), wants);
  if (wants) {
    ensure_param_grad(table);
    Tensor<Real>* tt = &table;
    std::vector<int> rows(ids.begin(), ids.end());
    node(out).backprop = [this, out, tt, rows = std::move(rows), dim] {
      const auto& g = nodes_[out.id].grad;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        Real* dst = tt->grad.data() + static_cast<std::size_t>(rows[r]) * dim;
        const Real* src = g.data() + r * dim;
        for (int j = 0; j < dim; ++j) dst[j] += src[j];
      }
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const int batch = rows(parts[0]);
  std::vector<int> widths;
  int total = 0;
  bool needs = false;
  for (Var p : parts) {
    if (shape(p).size() != 2 || rows(p) != batch) throw std::invalid_argument("concat_cols: row mismatch");
    widths.push_back(cols(p));
    total += cols(p);
    needs = needs || tracking(p);
  }
  std::vector<Real> v(static_cast<std::size_t>(batch) * total);
  int offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto vp = value(parts[k]);
    for (int b = 0; b < batch; ++b)
      std::copy_n(vp.begin() + static_cast<std::ptrdiff_t>(b) * widths[k], widths[k],
                  v.begin() + static_cast<std::ptrdiff_t>(b) * total + offset);
    offset += widths[k];
  }
  Var out = push(Shape{batch, total}, std::move(v), needs);
  if (needs) {
    std::vector<Var> inputs(parts.begin(), parts.end());
    node(out).backprop = [this, out, inputs = std::move(inputs), widths = std::move(widths), batch, total] {
      const auto& g = nodes_[out.id].grad;
      int offset = 0;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        if (tracking(inputs[k])) {
          auto& gk = grad_of(inputs[k]);
          for (int b = 0; b < batch; ++b)
            for (int j = 0; j < widths[k]; ++j)
              gk[static_cast<std::size_t>(b) * widths[k] + j] += g[static_cast<std::size_t>(b) * total + offset + j];
        }
        offset += widths[k];
      }
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::slice_cols(Var a, int begin, int count) {
  const int batch = rows(a), width = cols(a);
  if (begin < 0 || count <= 0 || begin + count > width) throw std::invalid_argument("slice_cols: out of range");
  auto va = value(a);
  std::vector<Real> v(static_cast<std::size_t>(batch) * count);
  for (int b = 0; b < batch; ++b)
    std::copy_n(va.begin() + static_cast<std::ptrdiff_t>(b) * width + begin, count,
                v.begin() + static_cast<std::ptrdiff_t>(b) * count);
  Var out = push(Shape{batch, count}, std::move(v), tracking(a));
  if (node(out).needs_grad) {
    node(out).backprop = [this, out, a, begin, count, batch, width] {
      const auto& g = nodes_[out.id].grad;
      auto& ga = grad_of(a);
      for (int b = 0; b < batch; ++b)
        for (int j = 0; j < count; ++j)
          ga[static_cast<std::size_t>(b) * width + begin + j] += g[static_cast<std::size_t>(b) * count + j];
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::select_rows(Var fresh, Var old, std::span<const std::uint8_t> keep) {
  require_same_shape(fresh, old, "select_rows");
  const int batch = rows(fresh);
  if (static_cast<int>(keep.size()) != batch) throw std::invalid_argument("select_rows: mask length mismatch");
  const std::size_t width = value(fresh).size() / batch;
  std::vector<Real> v(value(old).begin(), value(old).end());
  auto vf = value(fresh);
  for (int b = 0; b < batch; ++b)
    if (keep[b]) std::copy_n(vf.begin() + b * width, width, v.begin() + b * width);
  Var out = push(shape(fresh), std::move(v), tracking(fresh) || tracking(old));
  if (node(out).needs_grad) {
    std::vector<std::uint8_t> k(keep.begin(), keep.end());
    node(out).backprop = [this, out, fresh, old, k = std::move(k), width] {
      const auto& g = nodes_[out.id].grad;
      for (std::size_t b = 0; b < k.size(); ++b) {
        Var target = k[b] ? fresh : old;
        if (!tracking(target)) continue;
        auto& gt = grad_of(target);
        for (std::size_t j = 0; j < width; ++j) gt[b * width + j] += g[b * width + j];
      }
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::softmax_rows(Var a) {
  const std::size_t width = static_cast<std::size_t>(cols(a));
  std::vector<Real> v(value(a).begin(), value(a).end());
  for (std::size_t start = 0; start < v.size(); start += width)
    softmax_inplace(std::span<Real>(v).subspan(start, width));
  Var out = push(shape(a), std::move(v), tracking(a));
  if (node(out).needs_grad) {
    node(out).backprop = [this, out, a, width] {
      const auto& n = nodes_[out.id];
      auto& ga = grad_of(a);
      for (std::size_t start = 0; start < n.value.size(); start += width) {
        Real inner = 0;
        for (std::size_t j = 0; j < width; ++j) inner += n.value[start + j] * n.grad[start + j];
        for (std::size_t j = 0; j < width; ++j) ga[start + j] += n.value[start + j] * (n.grad[start + j] - inner);
      }
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::masked_softmax_rows(Var a, std::span<const std::uint8_t> mask) {
  if (mask.size() != value(a).size()) throw std::invalid_argument("masked_softmax_rows: mask length mismatch");
  const std::size_t width = static_cast<std::size_t>(cols(a));
  auto va = value(a);
  std::vector<Real> v(va.size(), Real(0));
  for (std::size_t start = 0; start < v.size(); start += width) {
    Real peak = -std::numeric_limits<Real>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < width; ++j) {
      if (!mask[start + j]) continue;
      if (!std::isfinite(va[start + j])) throw std::domain_error("softmax: non-finite input");
      peak = std::max(peak, va[start + j]);
      any = true;
    }
    if (!any) continue;
    Real total = 0;
    for (std::size_t j = 0; j < width; ++j) {
      if (!mask[start + j]) continue;
      v[start + j] = std::exp(va[start + j] - peak);
      total += v[start + j];
    }
    for (std::size_t j = 0; j < width; ++j) v[start + j] /= total;
  }
  Var out = push(shape(a), std::move(v), tracking(a));
  if (node(out).needs_grad) {
    node(out).backprop = [this, out, a, width] {
      const auto& n = nodes_[out.id];
      auto& ga = grad_of(a);
      for (std::size_t start = 0; start < n.value.size(); start += width) {
        Real inner = 0;
        for (std::size_t j = 0; j < width; ++j) inner += n.value[start + j] * n.grad[start + j];
        // masked entries have value 0 and therefore receive no gradient
        for (std::size_t j = 0; j < width; ++j) ga[start + j] += n.value[start + j] * (n.grad[start + j] - inner);
      }
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::lstm_pointwise(Var gates, Var c_prev) {
  const int batch = rows(gates), hidden = cols(c_prev);
  if (cols(gates) != 4 * hidden || rows(c_prev) != batch) {
    throw std::invalid_argument("lstm: gates " + shape_string(shape(gates)) + " incompatible with cell " +
                                shape_string(shape(c_prev)));
  }
  auto vg = value(gates);
  auto vc = value(c_prev);
  // cache activated gates for backward: (i, f, o, g) per row
  std::vector<Real> act(vg.size());
  std::vector<Real> v(static_cast<std::size_t>(batch) * 2 * hidden);
  for (int b = 0; b < batch; ++b) {
    const Real* gr = vg.data() + static_cast<std::size_t>(b) * 4 * hidden;
    Real* ar = act.data() + static_cast<std::size_t>(b) * 4 * hidden;
    Real* hr = v.data() + static_cast<std::size_t>(b) * 2 * hidden;
    for (int j = 0; j < hidden; ++j) {
      const Real ig = sigmoid_of(gr[j]);
      const Real fg = sigmoid_of(gr[hidden + j]);
      const Real og = sigmoid_of(gr[2 * hidden + j]);
      const Real cand = std::tanh(gr[3 * hidden + j]);
      const Real c = fg * vc[static_cast<std::size_t>(b) * hidden + j] + ig * cand;
      ar[j] = ig;
      ar[hidden + j] = fg;
      ar[2 * hidden + j] = og;
      ar[3 * hidden + j] = cand;
      hr[j] = og * std::tanh(c);
      hr[hidden + j] = c;
    }
  }
  Var out = push(Shape{batch, 2 * hidden}, std::move(v), tracking(gates) || tracking(c_prev));
  if (node(out).needs_grad) {
    node(out).backprop = [this, out, gates, c_prev, act = std::move(act), batch, hidden] {
      const auto& n = nodes_[out.id];
      auto vc = value(c_prev);
      const bool want_g = tracking(gates), want_c = tracking(c_prev);
      std::vector<Real>* gg = want_g ? &grad_of(gates) : nullptr;
      std::vector<Real>* gc = want_c ? &grad_of(c_prev) : nullptr;
      for (int b = 0; b < batch; ++b) {
        const Real* ar = act.data() + static_cast<std::size_t>(b) * 4 * hidden;
        const Real* outr = n.value.data() + static_cast<std::size_t>(b) * 2 * hidden;
        const Real* gout = n.grad.data() + static_cast<std::size_t>(b) * 2 * hidden;
        for (int j = 0; j < hidden; ++j) {
          const Real ig = ar[j], fg = ar[hidden + j], og = ar[2 * hidden + j], cand = ar[3 * hidden + j];
          const Real c = outr[hidden + j];
          const Real tc = std::tanh(c);
          const Real dh = gout[j];
          const Real dc = gout[hidden + j] + dh * og * (Real(1) - tc * tc);
          const Real cp = vc[static_cast<std::size_t>(b) * hidden + j];
          if (gg) {
            Real* gr = gg->data() + static_cast<std::size_t>(b) * 4 * hidden;
            gr[j] += dc * cand * ig * (Real(1) - ig);
            gr[hidden + j] += dc * cp * fg * (Real(1) - fg);
            gr[2 * hidden + j] += dh * tc * og * (Real(1) - og);
            gr[3 * hidden + j] += dc * ig * (Real(1) - cand * cand);
          }
          if (gc) (*gc)[static_cast<std::size_t>(b) * hidden + j] += dc * fg;
        }
      }
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::dropout(Var a, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout: p must satisfy 0 <= p < 1");
  if (!training || p == 0.0) return a;
  const Real keep_scale = static_cast<Real>(1.0 / (1.0 - p));
  auto va = value(a);
  std::vector<Real> factor(va.size());
  std::vector<Real> v(va.size());
  for (std::size_t i = 0; i < va.size(); ++i) {
    factor[i] = rng.uniform() < p ? Real(0) : keep_scale;
    v[i] = va[i] * factor[i];
  }
  Var out = push(shape(a), std::move(v), tracking(a));
  if (node(out).needs_grad) {
    node(out).backprop = [this, out, a, factor = std::move(factor)] {
      const auto& g = nodes_[out.id].grad;
      auto& ga = grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor[i];
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::stack_steps(std::span<const Var> steps) {
  if (steps.empty()) throw std::invalid_argument("stack_steps: no inputs");
  const int batch = rows(steps[0]), width = cols(steps[0]);
  const int length = static_cast<int>(steps.size());
  bool needs = false;
  for (Var s : steps) {
    if (rows(s) != batch || cols(s) != width) throw std::invalid_argument("stack_steps: shape mismatch");
    needs = needs || tracking(s);
  }
  std::vector<Real> v(static_cast<std::size_t>(batch) * length * width);
  for (int t = 0; t < length; ++t) {
    auto vs = value(steps[t]);
    for (int b = 0; b < batch; ++b)
      std::copy_n(vs.begin() + static_cast<std::ptrdiff_t>(b) * width, width,
                  v.begin() + (static_cast<std::ptrdiff_t>(b) * length + t) * width);
  }
  Var out = push(Shape{batch, length, width}, std::move(v), needs);
  if (needs) {
    std::vector<Var> inputs(steps.begin(), steps.end());
    node(out).backprop = [this, out, inputs = std::move(inputs), batch, length, width] {
      const auto& g = nodes_[out.id].grad;
      for (int t = 0; t < length; ++t) {
        if (!tracking(inputs[t])) continue;
        auto& gs = grad_of(inputs[t]);
        for (int b = 0; b < batch; ++b)
          for (int j = 0; j < width; ++j)
            gs[static_cast<std::size_t>(b) * width + j] +=
                g[(static_cast<std::size_t>(b) * length + t) * width + j];
      }
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::attention_scores(Var memory, Var query) {
  const Shape& ms = shape(memory);
  if (ms.size() != 3 || rows(query) != ms[0] || cols(query) != ms[2]) {
    throw std::invalid_argument("attention_scores: memory " + shape_string(ms) + " vs query " +
                                shape_string(shape(query)));
  }
  const int batch = ms[0], length = ms[1], width = ms[2];
  auto vm = value(memory);
  auto vq = value(query);
  std::vector<Real> v(static_cast<std::size_t>(batch) * length);
  for (int b = 0; b < batch; ++b)
    for (int t = 0; t < length; ++t) {
      const Real* mr = vm.data() + (static_cast<std::size_t>(b) * length + t) * width;
      const Real* qr = vq.data() + static_cast<std::size_t>(b) * width;
      Real acc = 0;
      for (int j = 0; j < width; ++j) acc += mr[j] * qr[j];
      v[static_cast<std::size_t>(b) * length + t] = acc;
    }
  Var out = push(Shape{batch, length}, std::move(v), tracking(memory) || tracking(query));
  if (node(out).needs_grad) {
    node(out).backprop = [this, out, memory, query, batch, length, width] {
      const auto& g = nodes_[out.id].grad;
      auto vm = value(memory);
      auto vq = value(query);
      const bool want_m = tracking(memory), want_q = tracking(query);
      std::vector<Real>* gm = want_m ? &grad_of(memory) : nullptr;
      std::vector<Real>* gq = want_q ? &grad_of(query) : nullptr;
      for (int b = 0; b < batch; ++b)
        for (int t = 0; t < length; ++t) {
          const Real gs = g[static_cast<std::size_t>(b) * length + t];
          if (gs == Real(0)) continue;
          const std::size_t mo = (static_cast<std::size_t>(b) * length + t) * width;
          const std::size_t qo = static_cast<std::size_t>(b) * width;
          for (int j = 0; j < width; ++j) {
            if (gm) (*gm)[mo + j] += gs * vq[qo + j];
            if (gq) (*gq)[qo + j] += gs * vm[mo + j];
          }
        }
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::attention_readout(Var memory, Var weights) {
  const Shape& ms = shape(memory);
  if (ms.size() != 3 || rows(weights) != ms[0] || cols(weights) != ms[1]) {
    throw std::invalid_argument("attention_readout: memory " + shape_string(ms) + " vs weights " +
                                shape_string(shape(weights)));
  }
  const int batch = ms[0], length = ms[1], width = ms[2];
  auto vm = value(memory);
  auto vw = value(weights);
  std::vector<Real> v(static_cast<std::size_t>(batch) * width, Real(0));
  for (int b = 0; b < batch; ++b)
    for (int t = 0; t < length; ++t) {
      const Real w = vw[static_cast<std::size_t>(b) * length + t];
      if (w == Real(0)) continue;
      const Real* mr = vm.data() + (static_cast<std::size_t>(b) * length + t) * width;
      Real* outr = v.data() + static_cast<std::size_t>(b) * width;
      for (int j = 0; j < width; ++j) outr[j] += w * mr[j];
    }
  Var out = push(Shape{batch, width}, std::move(v), tracking(memory) || tracking(weights));
  if (node(out).needs_grad) {
    node(out).backprop = [this, out, memory, weights, batch, length, width] {
      const auto& g = nodes_[out.id].grad;
      auto vm = value(memory);
      auto vw = value(weights);
      const bool want_m = tracking(memory), want_w = tracking(weights);
      std::vector<Real>* gm = want_m ? &grad_of(memory) : nullptr;
      std::vector<Real>* gw = want_w ? &grad_of(weights) : nullptr;
      for (int b = 0; b < batch; ++b)
        for (int t = 0; t < length; ++t) {
          const std::size_t mo = (static_cast<std::size_t>(b) * length + t) * width;
          const std::size_t go = static_cast<std::size_t>(b) * width;
          const Real w = vw[static_cast<std::size_t>(b) * length + t];
          Real acc = 0;
          for (int j = 0; j < width; ++j) {
            acc += g[go + j] * vm[mo + j];
            if (gm) (*gm)[mo + j] += w * g[go + j];
          }
          if (gw) (*gw)[static_cast<std::size_t>(b) * length + t] += acc;
        }
    };
  }
  return out;
}

template <typename Real>
Var Graph<Real>::cross_entropy_sum(Var logits, std::span<const int> targets, std::span<const Real> weights) {
  const int batch = rows(logits), vocab = cols(logits);
  if (static_cast<int>(targets.size()) != batch || static_cast<int>(weights.size()) != batch) {
    throw std::invalid_argument("cross_entropy_sum: target/weight length mismatch");
  }
  auto vl = value(logits);
  std::vector<Real> probs(vl.size(), Real(0));
  Real total = 0;
  for (int b = 0; b < batch; ++b) {
    if (weights[b] == Real(0)) continue;
    if (targets[b] < 0 || targets[b] >= vocab) throw std::out_of_range("cross_entropy_sum: target id out of range");
    auto row = std::span<Real>(probs).subspan(static_cast<std::size_t>(b) * vocab, vocab);
    std::copy_n(vl.begin() + static_cast<std::ptrdiff_t>(b) * vocab, vocab, row.begin());
    Real peak = row[0];
    for (Real x : row) peak = std::max(peak, x);
    Real z = 0;
    for (Real x : row) z += std::exp(x - peak);
    const Real log_z = peak + std::log(z);
    total += weights[b] * (log_z - row[targets[b]]);
    for (Real& x : row) x = std::exp(x - log_z);
  }
  Var out = push(Shape{1}, {total}, tracking(logits));
  if (node(out).needs_grad) {
    std::vector<int> tg(targets.begin(), targets.end());
    std::vector<Real> wt(weights.begin(), weights.end());
    node(out).backprop = [this, out, logits, probs = std::move(probs), tg = std::move(tg), wt = std::move(wt), vocab] {
      const Real g = nodes_[out.id].grad[0];
      auto& gl = grad_of(logits);
      for (std::size_t b = 0; b < tg.size(); ++b) {
        if (wt[b] == Real(0)) continue;
        const Real scale = g * wt[b];
        const std::size_t off = b * vocab;
        for (int v = 0; v < vocab; ++v) gl[off + v] += scale * probs[off + v];
        gl[off + tg[b]] -= scale;
      }
    };
  }
  return out;
}

template <typename Real>
void Graph<Real>::backward(Var loss) {
  Node& root = node(loss);
  if (root.value.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " + shape_string(root.shape));
  }
  if (!std::isfinite(root.value[0])) throw std::domain_error("backward: loss is not finite");
  if (!grad_enabled_ || !root.needs_grad) return;
  for (auto& n : nodes_) n.grad.clear();
  grad_of(loss)[0] = Real(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty() || !n.backprop) continue;
    n.backprop();
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace ctxnmt
