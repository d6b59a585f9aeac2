#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ctxnmt/corpus.hpp"

namespace ctxnmt {

// Which side of the previous sentence carries the information needed to
// resolve a pronoun slot.
enum class SynthMode { SourceInformative, TargetInformative };

std::string_view to_string(SynthMode mode);
SynthMode parse_synth_mode(std::string_view text);

struct SynthConfig {
  SynthMode mode = SynthMode::TargetInformative;
  int num_documents = 2000;
  int min_sentences = 2;
  int max_sentences = 4;
  int num_entities = 4;
  int num_fillers = 20;
  int min_length = 4;  // tokens per sentence, slot and final "." included
  int max_length = 8;
  std::uint64_t seed = 7;
  // Target sentences end in a particle agreeing with their own slot rendering
  // instead of ".".
  bool agreement = true;

  void validate() const;
};

// Slot annotation of one sentence. The slot is always the first target token.
struct SlotRecord {
  bool pronoun = false;  // true: source shows PRO, target must be resolved from context
  std::string label;     // gold target rendering, e.g. "E2_b"
};

struct SlotMeta {
  SynthMode mode = SynthMode::TargetInformative;
  std::vector<std::string> doc_ids;
  std::vector<std::vector<SlotRecord>> slots;
};

struct SynthCorpus {
  std::vector<Document> documents;
  SlotMeta meta;
};

// Target-informative: sentence 1 mentions entity E_k, rendered on the target
// side as one of two synonyms chosen uniformly per document; every later
// sentence has source PRO whose gold rendering is that synonym.
// Source-informative: mention and pronoun sentences alternate; each mention's
// source already names the synonym, and the following pronoun sentence must
// repeat it.
SynthCorpus generate_synthetic(const SynthConfig& config);

std::string entity_source_token(int entity, int num_entities);
std::string entity_target_token(int entity, int variant, int num_entities);
// Sentence-final target particle for a rendering, e.g. "agr_E2_b".
std::string agreement_token(const std::string& rendering);
inline constexpr std::string_view kPronounToken = "PRO";

void write_meta(const SlotMeta& meta, const std::filesystem::path& path);
SlotMeta read_meta(const std::filesystem::path& path);

}  // namespace ctxnmt
