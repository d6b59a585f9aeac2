#pragma once

#include <vector>

#include "ctxnmt/batch.hpp"
#include "ctxnmt/model.hpp"
#include "ctxnmt/rng.hpp"

namespace fixtures {

using namespace ctxnmt;

// Random id documents over a vocabulary of `vocab` (reserved ids excluded).
inline std::vector<EncodedDocument> random_documents(Rng& rng, int docs, int vocab, int max_sentences = 3,
                                                     int max_len = 4) {
  std::vector<EncodedDocument> out;
  for (int d = 0; d < docs; ++d) {
    EncodedDocument doc;
    const int n = 1 + static_cast<int>(rng.below(max_sentences));
    for (int s = 0; s < n; ++s) {
      EncodedPair pair;
      const int ls = 1 + static_cast<int>(rng.below(max_len));
      const int lt = 1 + static_cast<int>(rng.below(max_len));
      for (int i = 0; i < ls; ++i) pair.source.push_back(Vocabulary::kReserved + static_cast<int>(rng.below(vocab - 4)));
      for (int i = 0; i < lt; ++i) pair.target.push_back(Vocabulary::kReserved + static_cast<int>(rng.below(vocab - 4)));
      doc.push_back(pair);
    }
    out.push_back(doc);
  }
  return out;
}

inline ModelConfig tiny_config(Variant v, int vocab = 12, int dim = 4) {
  ModelConfig c;
  c.variant = v;
  c.embed_dim = dim;
  c.hidden_dim = dim;
  c.source_vocab = vocab;
  c.target_vocab = vocab;
  c.dropout = 0.0;
  return c;
}

}  // namespace fixtures
