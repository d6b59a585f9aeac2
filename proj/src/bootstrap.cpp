#include "ctxnmt/bootstrap.hpp"

#include <algorithm>
#include <stdexcept>

#include "ctxnmt/bleu.hpp"
#include "ctxnmt/rng.hpp"

namespace ctxnmt {

SignificanceResult bootstrap_significance(const std::vector<Sentence>& hyps_a, const std::vector<Sentence>& hyps_b,
                                          const std::vector<Sentence>& references, int num_resamples,
                                          std::uint64_t seed) {
  if (hyps_a.size() != references.size() || hyps_b.size() != references.size()) {
    throw std::invalid_argument("bootstrap: systems and references must have the same sentence count");
  }
  if (references.empty()) throw std::invalid_argument("bootstrap: empty test set");
  if (num_resamples < 1) throw std::invalid_argument("bootstrap: num_resamples must be >= 1");

  std::vector<BleuStats> stats_a, stats_b;
  BleuStats total_a, total_b;
  for (std::size_t i = 0; i < references.size(); ++i) {
    stats_a.push_back(sentence_stats(hyps_a[i], references[i]));
    stats_b.push_back(sentence_stats(hyps_b[i], references[i]));
    total_a += stats_a.back();
    total_b += stats_b.back();
  }

  SignificanceResult result;
  result.num_resamples = num_resamples;
  result.bleu_a = bleu_from_stats(total_a);
  result.bleu_b = bleu_from_stats(total_b);

  Rng rng(seed);
  int not_better = 0;
  std::vector<double> deltas;
  deltas.reserve(num_resamples);
  const std::size_t n = references.size();
  for (int r = 0; r < num_resamples; ++r) {
    BleuStats a, b;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t idx = rng.below(n);
      a += stats_a[idx];
      b += stats_b[idx];
    }
    const double score_a = bleu_from_stats(a), score_b = bleu_from_stats(b);
    if (score_b <= score_a) ++not_better;
    deltas.push_back(score_b - score_a);
  }
  result.p_value = static_cast<double>(not_better) / num_resamples;
  double sum = 0;
  for (double d : deltas) sum += d;
  result.mean_delta = sum / num_resamples;
  std::sort(deltas.begin(), deltas.end());
  result.delta_low = deltas[static_cast<std::size_t>(0.025 * (num_resamples - 1))];
  result.delta_high = deltas[static_cast<std::size_t>(0.975 * (num_resamples - 1))];
  return result;
}

}  // namespace ctxnmt
