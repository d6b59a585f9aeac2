#include "ctxnmt/bleu.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace ctxnmt {

namespace {

std::map<std::vector<std::string>, long long> ngram_counts(const Sentence& s, int n) {
  std::map<std::vector<std::string>, long long> counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[std::vector<std::string>(s.begin() + i, s.begin() + i + n)];
  return counts;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  for (int n = 0; n < kBleuOrder; ++n) {
    matches[n] += other.matches[n];
    totals[n] += other.totals[n];
  }
  hyp_length += other.hyp_length;
  ref_length += other.ref_length;
  return *this;
}

BleuStats sentence_stats(const Sentence& hypothesis, const Sentence& reference) {
  BleuStats s;
  s.hyp_length = static_cast<long long>(hypothesis.size());
  s.ref_length = static_cast<long long>(reference.size());
  for (int n = 1; n <= kBleuOrder; ++n) {
    const auto hyp = ngram_counts(hypothesis, n);
    const auto ref = ngram_counts(reference, n);
    long long matched = 0, total = 0;
    for (const auto& [gram, count] : hyp) {
      total += count;
      if (auto it = ref.find(gram); it != ref.end()) matched += std::min(count, it->second);
    }
    s.matches[n - 1] = matched;
    s.totals[n - 1] = total;
  }
  return s;
}

double bleu_from_stats(const BleuStats& s) {
  if (s.hyp_length == 0) return 0.0;
  double log_sum = 0;
  for (int n = 0; n < kBleuOrder; ++n) {
    if (s.matches[n] == 0 || s.totals[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n]));
  }
  const double c = static_cast<double>(s.hyp_length), r = static_cast<double>(s.ref_length);
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return 100.0 * bp * std::exp(log_sum / kBleuOrder);
}

EvalReport make_report(const BleuStats& s) {
  EvalReport r;
  r.hyp_length = s.hyp_length;
  r.ref_length = s.ref_length;
  for (int n = 0; n < kBleuOrder; ++n) {
    r.precisions[n] = s.totals[n] ? static_cast<double>(s.matches[n]) / static_cast<double>(s.totals[n]) : 0.0;
  }
  if (s.hyp_length > 0) {
    const double c = static_cast<double>(s.hyp_length), ref = static_cast<double>(s.ref_length);
    r.brevity_penalty = c > ref ? 1.0 : std::exp(1.0 - ref / c);
  }
  r.bleu_raw = bleu_from_stats(s);
  r.bleu = std::round(r.bleu_raw * 100.0) / 100.0;
  return r;
}

EvalReport bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references) {
  if (hypotheses.size() != references.size()) {
    throw std::invalid_argument("bleu: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                                std::to_string(references.size()) + " references");
  }
  BleuStats total;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) total += sentence_stats(hypotheses[i], references[i]);
  return make_report(total);
}

std::string EvalReport::to_text() const {
  std::string out = "BLEU = " + fixed(bleu, 2) + ", ";
  for (int n = 0; n < kBleuOrder; ++n) {
    if (n) out += "/";
    out += fixed(100.0 * precisions[n], 1);
  }
  out += " (BP=" + fixed(brevity_penalty, 3) + ", ratio=" +
         fixed(ref_length ? static_cast<double>(hyp_length) / static_cast<double>(ref_length) : 0.0, 3) +
         ", hyp_len=" + std::to_string(hyp_length) + ", ref_len=" + std::to_string(ref_length) + ")\n";
  return out;
}

std::string EvalReport::to_records() const {
  std::string out = "bleu=" + fixed(bleu, 2) + "\n";
  for (int n = 0; n < kBleuOrder; ++n) out += "p" + std::to_string(n + 1) + "=" + fixed(precisions[n], 6) + "\n";
  out += "brevity_penalty=" + fixed(brevity_penalty, 6) + "\n";
  out += "hyp_length=" + std::to_string(hyp_length) + "\n";
  out += "ref_length=" + std::to_string(ref_length) + "\n";
  return out;
}

}  // namespace ctxnmt
