#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "ctxnmt/model.hpp"
#include "fixtures.hpp"
#include "minigraph.hpp"

namespace model_gradcheck {

using namespace ctxnmt;

struct Worst {
  double rel = 0;
  std::string where;
};

// Central differences in double (eps 1e-4) against autodiff in Real. `run_real`
// rebuilds the graph and optionally backpropagates; `reference` is perturbed
// in place.
template <typename Real>
Worst compare(ModelParams<Real>& params, ModelParams<double>& reference,
              const std::function<double(ModelParams<Real>&, bool)>& run_real,
              const std::function<double(ModelParams<double>&)>& run_double, double floor) {
  params.zero_grad();
  run_real(params, true);
  std::vector<std::pair<std::string, Tensor<Real>*>> real;
  params.for_each([&](const std::string& n, Tensor<Real>& t) { real.emplace_back(n, &t); });
  std::vector<Tensor<double>*> dbl;
  reference.for_each([&](const std::string&, Tensor<double>& t) { dbl.push_back(&t); });
  const double eps = 1e-4;
  Worst worst;
  for (std::size_t k = 0; k < real.size(); ++k) {
    auto& t = *dbl[k];
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t.data[i];
      t.data[i] = saved + eps;
      const double up = run_double(reference);
      t.data[i] = saved - eps;
      const double down = run_double(reference);
      t.data[i] = saved;
      const double numeric = (up - down) / (2 * eps);
      const double rel = minigraph::rel_error(numeric, real[k].second->grad[i], floor);
      if (rel > worst.rel) worst = {rel, real[k].first + "[" + std::to_string(i) + "]"};
    }
  }
  return worst;
}

struct FullResult {
  Worst f64;
  Worst f32;
};

// Loss of sentence 2 of a 3-document batch (V=12, E=H=4), with the cache built
// from sentence 1 by the unperturbed weights. The cache is detached state, so
// it stays fixed while differencing.
inline FullResult full_forward(Variant v) {
  Rng data_rng(11);
  auto docs = fixtures::random_documents(data_rng, 3, 12, 2, 4);
  for (auto& d : docs)
    while (d.size() < 2) d.push_back(d.front());
  const auto batches = make_batches(docs, 3, 1, false);
  const auto& positions = batches.front().positions;

  Rng init(3);
  auto p64 = ModelParams<double>::init(fixtures::tiny_config(v), init);
  auto p32 = p64.cast<float>();

  auto first_cache = [&](auto& params) {
    using Real = typename std::decay_t<decltype(params.source_embedding.data)>::value_type;
    Seq2Seq<Real> model(params);
    Graph<Real> g(false);
    auto first = model.forward_loss(g, positions[0], ContextCache<Real>{}, RunMode{});
    return model.next_cache(g, positions[0], first);
  };
  const auto cache64 = first_cache(p64);
  const auto cache32 = first_cache(p32);
  auto loss_of = [&](auto& params, const auto& cache, bool backward) {
    using Real = typename std::decay_t<decltype(params.source_embedding.data)>::value_type;
    Seq2Seq<Real> model(params);
    Graph<Real> g(true);
    auto res = model.forward_loss(g, positions[1], cache, RunMode{});
    if (backward) g.backward(res.loss);
    return static_cast<double>(g.scalar(res.loss));
  };
  const std::function<double(ModelParams<double>&)> run_double = [&](ModelParams<double>& p) {
    return loss_of(p, cache64, false);
  };
  const std::function<double(ModelParams<double>&, bool)> run64 = [&](ModelParams<double>& p, bool b) {
    return loss_of(p, cache64, b);
  };
  const std::function<double(ModelParams<float>&, bool)> run32 = [&](ModelParams<float>& p, bool b) {
    return loss_of(p, cache32, b);
  };
  FullResult out;
  out.f64 = compare<double>(p64, p64, run64, run_double, 1e-6);
  auto ref = p64;
  out.f32 = compare<float>(p32, ref, run32, run_double, 1e-3);
  return out;
}

}  // namespace model_gradcheck
