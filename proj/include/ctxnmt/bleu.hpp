#pragma once

#include <array>
#include <string>
#include <vector>

#include "ctxnmt/corpus.hpp"

namespace ctxnmt {

inline constexpr int kBleuOrder = 4;

// Clipped n-gram match counts for corpus-level aggregation.
struct BleuStats {
  std::array<long long, kBleuOrder> matches{};
  std::array<long long, kBleuOrder> totals{};
  long long hyp_length = 0;
  long long ref_length = 0;

  BleuStats& operator+=(const BleuStats& other);
};

BleuStats sentence_stats(const Sentence& hypothesis, const Sentence& reference);

// BLEU-4 in percent, unrounded. No smoothing: any zero precision gives 0.
double bleu_from_stats(const BleuStats& stats);

struct EvalReport {
  double bleu = 0;      // percent, rounded to 2 decimals
  double bleu_raw = 0;  // percent, unrounded
  std::array<double, kBleuOrder> precisions{};
  double brevity_penalty = 0;
  long long hyp_length = 0;
  long long ref_length = 0;

  std::string to_text() const;
  // key=value, one per line
  std::string to_records() const;
};

EvalReport make_report(const BleuStats& stats);

// Throws std::invalid_argument when the sentence counts differ.
EvalReport bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references);

}  // namespace ctxnmt
