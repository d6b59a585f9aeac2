#pragma once

// Random composite graphs for gradient checking. A plan fixes the op sequence
// and shapes; the same plan builds in float or double so the float autodiff
// can be compared against a double finite-difference oracle.

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "ctxnmt/graph.hpp"

namespace minigraph {

using namespace ctxnmt;

enum Op {
  kTanh,
  kSigmoid,
  kLinearBias,
  kMulParam,
  kSoftmax,
  kMaskedSoftmax,
  kConcatSlice,
  kLstm,
  kAttention,
  kSelectRows,
  kEmbeddingAdd,
  kSubParam,
  kScale,
  kMatmul,
  kDropout,
  kNumOps
};

struct Plan {
  int batch = 1;
  int width = 2;
  std::vector<int> ops;
  bool cross_entropy = false;
  std::uint64_t seed = 0;
};

inline Plan random_plan(Rng& rng, std::uint64_t seed) {
  Plan p;
  p.seed = seed;
  p.batch = 1 + static_cast<int>(rng.below(3));
  p.width = 2 + static_cast<int>(rng.below(3));
  const int n = 2 + static_cast<int>(rng.below(5));
  for (int i = 0; i < n; ++i) p.ops.push_back(static_cast<int>(rng.below(kNumOps)));
  p.cross_entropy = rng.bernoulli(0.5);
  return p;
}

// Parameter store filled on the first build and replayed afterwards.
template <typename Real>
struct Params {
  std::deque<Tensor<Real>> tensors;
  std::size_t cursor = 0;
  Rng* creator = nullptr;  // set while creating

  Tensor<Real>& get(const Shape& shape) {
    if (creator) {
      tensors.push_back(Tensor<Real>::uniform(shape, -1.0, 1.0, *creator, true));
      return tensors.back();
    }
    return tensors.at(cursor++);
  }
};

template <typename Real>
Var build(Graph<Real>& g, const Plan& plan, Params<Real>& params) {
  params.cursor = 0;
  Rng aux(plan.seed * 7919 + 1);  // masks, ids, constants: identical on every build
  const int B = plan.batch, W = plan.width;
  auto random_mask = [&](int rows, int cols) {
    std::vector<std::uint8_t> m(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) m[static_cast<std::size_t>(r) * cols + c] = aux.bernoulli(0.7) ? 1 : 0;
      m[static_cast<std::size_t>(r) * cols + aux.below(cols)] = 1;
    }
    return m;
  };
  Var cur = g.parameter(params.get({B, W}));
  for (int op : plan.ops) {
    switch (op) {
      case kTanh: cur = g.tanh(cur); break;
      case kSigmoid: cur = g.sigmoid(cur); break;
      case kLinearBias: cur = g.add_bias(g.linear(cur, params.get({W, W})), params.get({W})); break;
      case kMulParam: cur = g.mul(cur, g.parameter(params.get({B, W}))); break;
      case kSoftmax: cur = g.softmax_rows(cur); break;
      case kMaskedSoftmax: cur = g.masked_softmax_rows(cur, random_mask(B, W)); break;
      case kConcatSlice: {
        const Var parts[] = {g.parameter(params.get({B, 2})), cur};
        cur = g.slice_cols(g.concat_cols(parts), 1, W);
        break;
      }
      case kLstm: {
        Var gates = g.linear(cur, params.get({4 * W, W}));
        Var hc = g.lstm_pointwise(gates, g.parameter(params.get({B, W})));
        cur = g.add(g.slice_cols(hc, 0, W), g.slice_cols(hc, W, W));
        break;
      }
      case kAttention: {
        const Var steps[] = {cur, g.parameter(params.get({B, W})), g.tanh(cur)};
        Var mem = g.stack_steps(steps);
        Var scores = g.attention_scores(mem, g.parameter(params.get({B, W})));
        cur = g.attention_readout(mem, g.masked_softmax_rows(scores, random_mask(B, 3)));
        break;
      }
      case kSelectRows: {
        std::vector<std::uint8_t> keep(B);
        for (auto& k : keep) k = aux.bernoulli(0.5) ? 1 : 0;
        cur = g.select_rows(cur, g.parameter(params.get({B, W})), keep);
        break;
      }
      case kEmbeddingAdd: {
        std::vector<int> ids(B);
        for (auto& id : ids) id = static_cast<int>(aux.below(5));
        cur = g.add(cur, g.embedding(params.get({5, W}), ids));
        break;
      }
      case kSubParam: cur = g.sub(cur, g.parameter(params.get({B, W}))); break;
      case kScale: cur = g.scale(cur, static_cast<Real>(-1.5)); break;
      case kMatmul: cur = g.matmul(cur, g.parameter(params.get({W, W}))); break;
      case kDropout: {
        Rng drop(plan.seed + 99);
        cur = g.dropout(cur, 0.3, true, drop);
        break;
      }
    }
  }
  if (plan.cross_entropy) {
    std::vector<int> targets(B);
    std::vector<Real> weights(B);
    for (int b = 0; b < B; ++b) {
      targets[b] = static_cast<int>(aux.below(W));
      weights[b] = b == 0 ? Real(1) : static_cast<Real>(aux.below(2));
    }
    return g.cross_entropy_sum(cur, targets, weights);
  }
  std::vector<Real> coeffs(static_cast<std::size_t>(B) * W);
  for (auto& c : coeffs) c = static_cast<Real>(aux.uniform(-1, 1));
  return g.dot(cur, g.constant({B, W}, std::move(coeffs)));
}

struct Result {
  double max_rel = 0;
  std::string where;
};

inline double rel_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Autodiff in Real against central differences (eps) computed in double.
template <typename Real>
Result check(const Plan& plan, double eps, double floor) {
  Params<double> ref;
  Rng creator(plan.seed);
  ref.creator = &creator;
  {
    Graph<double> g(false);
    build(g, plan, ref);
  }
  ref.creator = nullptr;

  Params<Real> live;
  for (const auto& t : ref.tensors) {
    std::vector<Real> values(t.data.begin(), t.data.end());
    live.tensors.emplace_back(t.shape, std::move(values), true);
  }
  {
    Graph<Real> g(true);
    Var loss = build(g, plan, live);
    g.backward(loss);
  }
  auto loss_at = [&]() {
    Graph<double> g(false);
    return g.scalar(build(g, plan, ref));
  };
  Result r;
  for (std::size_t k = 0; k < ref.tensors.size(); ++k) {
    auto& t = ref.tensors[k];
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t.data[i];
      t.data[i] = saved + eps;
      const double up = loss_at();
      t.data[i] = saved - eps;
      const double down = loss_at();
      t.data[i] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double analytic = live.tensors[k].grad.empty() ? 0.0 : live.tensors[k].grad[i];
      const double e = rel_error(numeric, analytic, floor);
      if (e > r.max_rel) r = {e, "tensor " + std::to_string(k) + "[" + std::to_string(i) + "]"};
    }
  }
  return r;
}

}  // namespace minigraph
