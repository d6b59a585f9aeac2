#include "ctxnmt/slot.hpp"

#include <stdexcept>

namespace ctxnmt {

namespace {

// "E2_b" -> "E2"
std::string entity_of(const std::string& rendering) {
  const auto cut = rendering.rfind('_');
  return cut == std::string::npos ? rendering : rendering.substr(0, cut);
}

}  // namespace

SlotScore score_slots(const std::vector<std::vector<Sentence>>& hypotheses, const SlotMeta& meta) {
  if (hypotheses.size() != meta.slots.size()) {
    throw std::invalid_argument("score_slots: " + std::to_string(hypotheses.size()) + " documents vs " +
                                std::to_string(meta.slots.size()) + " in meta");
  }
  SlotScore score;
  for (std::size_t d = 0; d < hypotheses.size(); ++d) {
    const auto& doc = hypotheses[d];
    const auto& slots = meta.slots[d];
    if (doc.size() != slots.size()) {
      throw std::invalid_argument("score_slots: document " + std::to_string(d) + " sentence count mismatch");
    }
    int antecedent = -1;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (!slots[i].pronoun) {
        antecedent = static_cast<int>(i);
        continue;
      }
      ++score.pronoun_slots;
      if (doc[i].empty()) continue;
      std::string expected;
      if (meta.mode == SynthMode::SourceInformative) {
        expected = slots[i].label;
      } else {
        if (antecedent < 0 || doc[antecedent].empty()) continue;
        const std::string& own = doc[antecedent].front();
        const std::string entity = entity_of(slots[i].label);
        if (own != entity + "_a" && own != entity + "_b") continue;
        expected = own;
      }
      if (doc[i].front() == expected) ++score.correct;
    }
  }
  return score;
}

}  // namespace ctxnmt
