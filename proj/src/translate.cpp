#include "ctxnmt/translate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace ctxnmt {

namespace {

template <typename Real>
struct Beam {
  std::vector<int> tokens;
  double log_prob = 0;
  std::vector<std::vector<Real>> carry_h, carry_c;  // per layer
  std::vector<std::vector<double>> top_states;
};

// Copies of graph values repeated over `rows` rows, as constants.
template <typename Real>
Var repeat_constant(Graph<Real>& g, Var single, int rows) {
  Shape s = g.shape(single);
  if (s[0] != 1) throw std::logic_error("repeat_constant: expected batch of 1");
  auto v = g.value(single);
  std::vector<Real> out;
  out.reserve(v.size() * rows);
  for (int r = 0; r < rows; ++r) out.insert(out.end(), v.begin(), v.end());
  s[0] = rows;
  return g.constant(s, std::move(out));
}

template <typename Real>
std::vector<std::uint8_t> repeat_mask(const std::vector<std::uint8_t>& mask, int rows) {
  std::vector<std::uint8_t> out;
  for (int r = 0; r < rows; ++r) out.insert(out.end(), mask.begin(), mask.end());
  return out;
}

template <typename Real>
Var stack_rows(Graph<Real>& g, const std::vector<const std::vector<Real>*>& rows) {
  std::vector<Real> data;
  for (const auto* r : rows) data.insert(data.end(), r->begin(), r->end());
  return g.constant({static_cast<int>(rows.size()), static_cast<int>(rows.front()->size())}, std::move(data));
}

template <typename Real>
std::vector<Real> row_of(const Graph<Real>& g, Var v, int row) {
  const int width = g.cols(v);
  auto all = g.value(v);
  return std::vector<Real>(all.begin() + static_cast<std::ptrdiff_t>(row) * width,
                           all.begin() + static_cast<std::ptrdiff_t>(row + 1) * width);
}

}  // namespace

template <typename Real>
Hypothesis translate_sentence(const Seq2Seq<Real>& model, const std::vector<int>& source,
                              const ContextCache<Real>& cache, const TranslateOptions& options,
                              StateMemory<Real>* encoder_out, TranslationStats* stats) {
  if (options.beam_size < 1) throw std::invalid_argument("beam_size must be >= 1");
  if (source.empty()) throw std::invalid_argument("cannot translate an empty sentence");
  Graph<Real> g(false);
  const RunMode eval{};
  const TokenMatrix src = TokenMatrix::from_rows({source});
  EncoderStates<Real> enc = model.encode(g, src, eval);
  ContextView<Real> view = model.context_view(g, cache, eval);
  if (stats) {
    ++stats->sentences;
    ++stats->encoder_runs;
    if (!cache.empty()) {
      if (is_separated(model.variant())) ++stats->context_encoder_runs;
      else ++stats->cache_hits;
    }
  }
  if (encoder_out) *encoder_out = StateMemory<Real>::capture(g, enc.states, enc.mask);

  const int layers = static_cast<int>(enc.final.size());
  const int max_steps = std::max(1, static_cast<int>(std::floor(options.max_length_ratio * source.size())));
  const int beam_size = options.beam_size;

  Beam<Real> start;
  for (int l = 0; l < layers; ++l) {
    start.carry_h.push_back(row_of(g, enc.final[l].h, 0));
    start.carry_c.push_back(row_of(g, enc.final[l].c, 0));
  }
  std::vector<Beam<Real>> alive{std::move(start)};
  std::vector<Hypothesis> finished;

  // encoder/context replicated per live-row count
  std::map<int, std::pair<EncoderStates<Real>, ContextView<Real>>> replicated;
  auto inputs_for = [&](int rows) -> const std::pair<EncoderStates<Real>, ContextView<Real>>& {
    auto it = replicated.find(rows);
    if (it != replicated.end()) return it->second;
    EncoderStates<Real> e = enc;
    ContextView<Real> c = view;
    if (rows != 1) {
      e.states = repeat_constant(g, enc.states, rows);
      e.mask = repeat_mask<Real>(enc.mask, rows);
      e.batch = rows;
      for (std::size_t k = 0; k < c.memories.size(); ++k) {
        c.memories[k] = repeat_constant(g, view.memories[k], rows);
        c.masks[k] = repeat_mask<Real>(view.masks[k], rows);
      }
    }
    return replicated.emplace(rows, std::make_pair(std::move(e), std::move(c))).first->second;
  };

  for (int step = 0; step < max_steps && !alive.empty(); ++step) {
    const int rows = static_cast<int>(alive.size());
    const auto& [e, c] = inputs_for(rows);
    std::vector<int> prev;
    std::vector<LstmState<Real>> carry;
    for (const auto& b : alive) prev.push_back(b.tokens.empty() ? Vocabulary::kBos : b.tokens.back());
    for (int l = 0; l < layers; ++l) {
      std::vector<const std::vector<Real>*> hs, cs;
      for (const auto& b : alive) {
        hs.push_back(&b.carry_h[l]);
        cs.push_back(&b.carry_c[l]);
      }
      carry.push_back({stack_rows(g, hs), stack_rows(g, cs)});
    }
    StepResult<Real> out = model.decode_step(g, prev, carry, e, c, eval);

    const int vocab = g.cols(out.logits);
    auto logits = g.value(out.logits);
    struct Candidate {
      double score;
      int row;
      int token;
    };
    std::vector<Candidate> candidates;
    candidates.reserve(static_cast<std::size_t>(rows) * vocab);
    for (int r = 0; r < rows; ++r) {
      const Real* lr = logits.data() + static_cast<std::size_t>(r) * vocab;
      double peak = lr[0];
      for (int v = 1; v < vocab; ++v) peak = std::max(peak, static_cast<double>(lr[v]));
      double z = 0;
      for (int v = 0; v < vocab; ++v) z += std::exp(static_cast<double>(lr[v]) - peak);
      const double log_z = peak + std::log(z);
      for (int v = 0; v < vocab; ++v) {
        if (v == Vocabulary::kPad || v == Vocabulary::kBos) continue;
        candidates.push_back({alive[r].log_prob + static_cast<double>(lr[v]) - log_z, r, v});
      }
    }
    const std::size_t keep = std::min(candidates.size(), static_cast<std::size_t>(beam_size));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.row != b.row) return a.row < b.row;
                        return a.token < b.token;
                      });

    std::vector<Beam<Real>> next;
    for (std::size_t k = 0; k < keep; ++k) {
      const Candidate& cand = candidates[k];
      const Beam<Real>& parent = alive[cand.row];
      Beam<Real> child;
      child.tokens = parent.tokens;
      child.log_prob = cand.score;
      child.top_states = parent.top_states;
      auto top = row_of(g, out.top_state, cand.row);
      child.top_states.emplace_back(top.begin(), top.end());
      if (cand.token == Vocabulary::kEos) {
        finished.push_back({std::move(child.tokens), child.log_prob, true, std::move(child.top_states)});
        continue;
      }
      child.tokens.push_back(cand.token);
      for (int l = 0; l < layers; ++l) {
        child.carry_h.push_back(row_of(g, out.carry[l].h, cand.row));
        child.carry_c.push_back(row_of(g, out.carry[l].c, cand.row));
      }
      next.push_back(std::move(child));
    }
    alive = std::move(next);
    if (static_cast<int>(finished.size()) >= beam_size) break;
    // log-probabilities only decrease, so a finished hypothesis that beats
    // every live one cannot be overtaken
    if (!finished.empty()) {
      double best_finished = finished.front().log_prob;
      for (const auto& f : finished) best_finished = std::max(best_finished, f.log_prob);
      bool any_better = false;
      for (const auto& b : alive) any_better = any_better || b.log_prob > best_finished;
      if (!any_better) break;
    }
  }

  if (finished.empty()) {
    // length limit reached without EOS
    auto best = std::max_element(alive.begin(), alive.end(),
                                 [](const Beam<Real>& a, const Beam<Real>& b) { return a.log_prob < b.log_prob; });
    return {best->tokens, best->log_prob, false, best->top_states};
  }
  auto best = finished.begin();
  for (auto it = finished.begin(); it != finished.end(); ++it)
    if (it->log_prob > best->log_prob) best = it;
  return *best;
}

template <typename Real>
std::vector<std::vector<int>> translate_document(const Seq2Seq<Real>& model,
                                                 const std::vector<std::vector<int>>& source_sentences,
                                                 const TranslateOptions& options, TranslationStats* stats) {
  std::vector<std::vector<int>> out;
  ContextCache<Real> cache;  // empty for the first sentence
  const Variant variant = model.variant();
  for (const auto& source : source_sentences) {
    StateMemory<Real> encoder_states;
    Hypothesis hyp = translate_sentence(model, source, cache, options, &encoder_states, stats);

    const TokenMatrix prev_source = TokenMatrix::from_rows({source});
    std::vector<int> produced = hyp.tokens;
    if (hyp.finished) produced.push_back(Vocabulary::kEos);
    const TokenMatrix prev_target = TokenMatrix::from_rows({produced});
    // states that read each generated token: every step after the BOS step.
    // A hypothesis cut at the length limit never reads its last token.
    StateMemory<Real> decoder_states;
    if (hyp.top_states.size() > 1) {
      decoder_states.batch = 1;
      decoder_states.length = static_cast<int>(hyp.top_states.size()) - 1;
      decoder_states.dim = model.config().hidden_dim;
      for (std::size_t k = 1; k < hyp.top_states.size(); ++k)
        for (double v : hyp.top_states[k]) decoder_states.values.push_back(static_cast<Real>(v));
      decoder_states.mask.assign(decoder_states.length, 1);
    }
    cache = make_context_cache<Real>(variant, &prev_source, &prev_target, &encoder_states, &decoder_states);
    out.push_back(std::move(hyp.tokens));
  }
  return out;
}

template Hypothesis translate_sentence(const Seq2Seq<float>&, const std::vector<int>&, const ContextCache<float>&,
                                       const TranslateOptions&, StateMemory<float>*, TranslationStats*);
template Hypothesis translate_sentence(const Seq2Seq<double>&, const std::vector<int>&, const ContextCache<double>&,
                                       const TranslateOptions&, StateMemory<double>*, TranslationStats*);
template std::vector<std::vector<int>> translate_document(const Seq2Seq<float>&, const std::vector<std::vector<int>>&,
                                                          const TranslateOptions&, TranslationStats*);
template std::vector<std::vector<int>> translate_document(const Seq2Seq<double>&,
                                                          const std::vector<std::vector<int>>&,
                                                          const TranslateOptions&, TranslationStats*);

}  // namespace ctxnmt
