#pragma once

#include <vector>

#include "ctxnmt/model.hpp"

namespace ctxnmt {

struct TranslateOptions {
  int beam_size = 1;              // 1 = greedy
  double max_length_ratio = 2.0;  // generation stops at EOS or ratio * source length
};

struct TranslationStats {
  int sentences = 0;
  int encoder_runs = 0;
  int context_encoder_runs = 0;  // separated variants re-encode the previous sentence
  int cache_hits = 0;            // shared variants reuse saved states
};

struct Hypothesis {
  std::vector<int> tokens;  // without BOS/EOS
  double log_prob = 0;
  bool finished = false;
  std::vector<std::vector<double>> top_states;  // one H-vector per generated step, EOS step included
};

// Decodes one sentence given the already-built context cache.
template <typename Real>
Hypothesis translate_sentence(const Seq2Seq<Real>& model, const std::vector<int>& source,
                              const ContextCache<Real>& cache, const TranslateOptions& options,
                              StateMemory<Real>* encoder_out = nullptr, TranslationStats* stats = nullptr);

// Translates sentences in order. Source-side caches come from the source
// sentences; target-side caches come from the model's own previous
// hypothesis (decoder states recorded after reading each generated token, or
// its tokens for the separated target encoder). The first sentence sees an empty cache.
template <typename Real>
std::vector<std::vector<int>> translate_document(const Seq2Seq<Real>& model,
                                                 const std::vector<std::vector<int>>& source_sentences,
                                                 const TranslateOptions& options = {},
                                                 TranslationStats* stats = nullptr);

}  // namespace ctxnmt
