#include "ctxnmt/synth.hpp"

#include <fstream>
#include <stdexcept>

#include "ctxnmt/bpe.hpp"
#include "ctxnmt/rng.hpp"

namespace ctxnmt {

std::string_view to_string(SynthMode mode) {
  return mode == SynthMode::TargetInformative ? "trg-informative" : "src-informative";
}

SynthMode parse_synth_mode(std::string_view text) {
  if (text == "trg-informative") return SynthMode::TargetInformative;
  if (text == "src-informative") return SynthMode::SourceInformative;
  throw std::invalid_argument("unknown synthetic mode '" + std::string(text) +
                              "' (expected trg-informative or src-informative)");
}

void SynthConfig::validate() const {
  if (num_documents < 1) throw std::invalid_argument("synth: num_documents must be >= 1");
  if (min_sentences < 1 || max_sentences < min_sentences) throw std::invalid_argument("synth: bad sentence range");
  if (num_entities < 1) throw std::invalid_argument("synth: num_entities must be >= 1");
  if (num_fillers < 1) throw std::invalid_argument("synth: num_fillers must be >= 1");
  if (min_length < 2 || max_length < min_length) throw std::invalid_argument("synth: bad sentence length range");
}

std::string entity_source_token(int entity, int num_entities) {
  return num_entities == 1 ? "E" : "E" + std::to_string(entity);
}

std::string entity_target_token(int entity, int variant, int num_entities) {
  return entity_source_token(entity, num_entities) + (variant == 0 ? "_a" : "_b");
}

std::string agreement_token(const std::string& rendering) { return "agr_" + rendering; }

namespace {

struct Body {
  Sentence source;
  Sentence target;
};

Body filler_body(const SynthConfig& cfg, Rng& rng) {
  const int length = cfg.min_length + static_cast<int>(rng.below(cfg.max_length - cfg.min_length + 1));
  Body body;
  for (int k = 0; k < length - 2; ++k) {
    const auto w = static_cast<int>(rng.below(cfg.num_fillers));
    body.source.push_back("w" + std::to_string(w));
    body.target.push_back("t" + std::to_string(w));
  }
  body.source.emplace_back(".");
  body.target.emplace_back(".");
  return body;
}

SentencePair with_slot(std::string source_slot, std::string target_slot, Body body) {
  SentencePair p;
  p.source.push_back(std::move(source_slot));
  p.source.insert(p.source.end(), body.source.begin(), body.source.end());
  p.target.push_back(std::move(target_slot));
  p.target.insert(p.target.end(), body.target.begin(), body.target.end());
  return p;
}

}  // namespace

SynthCorpus generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SynthCorpus out;
  out.meta.mode = cfg.mode;
  for (int d = 0; d < cfg.num_documents; ++d) {
    Document doc;
    doc.id = "doc-" + std::to_string(d);
    std::vector<SlotRecord> slots;
    const int length = cfg.min_sentences + static_cast<int>(rng.below(cfg.max_sentences - cfg.min_sentences + 1));
    int entity = 0, variant = 0;
    for (int i = 0; i < length; ++i) {
      const bool mention = cfg.mode == SynthMode::TargetInformative ? i == 0 : i % 2 == 0;
      if (mention) {
        entity = static_cast<int>(rng.below(cfg.num_entities));
        variant = rng.bernoulli(0.5) ? 1 : 0;
      }
      const std::string rendering = entity_target_token(entity, variant, cfg.num_entities);
      std::string source_slot;
      if (!mention) {
        source_slot = std::string(kPronounToken);
      } else if (cfg.mode == SynthMode::TargetInformative) {
        source_slot = entity_source_token(entity, cfg.num_entities);
      } else {
        source_slot = rendering;
      }
      Body body = filler_body(cfg, rng);
      if (cfg.agreement) body.target.back() = agreement_token(rendering);
      doc.pairs.push_back(with_slot(std::move(source_slot), rendering, std::move(body)));
      slots.push_back({!mention, rendering});
    }
    out.meta.doc_ids.push_back(doc.id);
    out.meta.slots.push_back(std::move(slots));
    out.documents.push_back(std::move(doc));
  }
  return out;
}

void write_meta(const SlotMeta& meta, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# mode=" << to_string(meta.mode) << '\n';
  for (std::size_t d = 0; d < meta.slots.size(); ++d) {
    out << meta.doc_ids[d] << '\t';
    for (std::size_t i = 0; i < meta.slots[d].size(); ++i) {
      if (i) out << ' ';
      out << (meta.slots[d][i].pronoun ? "pronoun:" : "mention:") << meta.slots[d][i].label;
    }
    out << '\n';
  }
}

SlotMeta read_meta(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  SlotMeta meta;
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("# mode=")) {
    throw std::runtime_error(path.string() + ": missing '# mode=' header");
  }
  meta.mode = parse_synth_mode(line.substr(7));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error(path.string() + ": malformed line: " + line);
    meta.doc_ids.push_back(line.substr(0, tab));
    auto& slots = meta.slots.emplace_back();
    for (const auto& field : split_whitespace(line.substr(tab + 1))) {
      const auto colon = field.find(':');
      if (colon == std::string::npos) throw std::runtime_error(path.string() + ": malformed slot " + field);
      const std::string role = field.substr(0, colon);
      if (role != "pronoun" && role != "mention") throw std::runtime_error(path.string() + ": unknown role " + role);
      slots.push_back({role == "pronoun", field.substr(colon + 1)});
    }
  }
  return meta;
}

}  // namespace ctxnmt
