#pragma once

#include <vector>

#include "ctxnmt/corpus.hpp"
#include "ctxnmt/synth.hpp"

namespace ctxnmt {

struct SlotScore {
  int pronoun_slots = 0;
  int correct = 0;
  double accuracy() const { return pronoun_slots ? static_cast<double>(correct) / pronoun_slots : 0.0; }
};

// Accuracy on the ambiguous pronoun slots of a synthetic test set. The slot is
// the first token of each pronoun sentence's (desegmented) hypothesis.
// src-informative: the slot must equal the gold rendering.
// trg-informative: the gold synonym is unknowable from any source, so the slot
// must repeat the rendering the system itself chose for the antecedent
// mention, and that rendering must be one of the entity's two synonyms.
SlotScore score_slots(const std::vector<std::vector<Sentence>>& hypotheses, const SlotMeta& meta);

}  // namespace ctxnmt
