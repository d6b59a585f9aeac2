#pragma once

#include <cstdint>
#include <vector>

#include "ctxnmt/corpus.hpp"

namespace ctxnmt {

struct SignificanceResult {
  double p_value = 1.0;  // fraction of resamples with BLEU(B) <= BLEU(A)
  int num_resamples = 0;
  double bleu_a = 0;
  double bleu_b = 0;
  double mean_delta = 0;  // mean of BLEU(B) - BLEU(A) over resamples
  double delta_low = 0;   // 2.5th percentile of the delta
  double delta_high = 0;  // 97.5th percentile of the delta
};

// Paired bootstrap over test sentences: draws `num_resamples` index sets with
// replacement and compares corpus BLEU of the two systems on each. Tests the
// hypothesis "B is better than A".
SignificanceResult bootstrap_significance(const std::vector<Sentence>& hyps_a, const std::vector<Sentence>& hyps_b,
                                          const std::vector<Sentence>& references, int num_resamples = 1000,
                                          std::uint64_t seed = 1);

}  // namespace ctxnmt
