#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "ctxnmt/bleu.hpp"
#include "ctxnmt/bootstrap.hpp"
#include "ctxnmt/bpe.hpp"
#include "ctxnmt/rng.hpp"
#include "ctxnmt/slot.hpp"

using namespace ctxnmt;

namespace {

Sentence words(const std::string& text) { return split_whitespace(text); }

// Textbook corpus BLEU-4 from n-gram multisets.
double reference_bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  double match[4] = {}, total[4] = {}, c = 0, r = 0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    c += hyps[s].size();
    r += refs[s].size();
    for (int n = 1; n <= 4; ++n) {
      std::map<Sentence, int> h, g;
      for (std::size_t i = 0; i + n <= hyps[s].size(); ++i) ++h[Sentence(hyps[s].begin() + i, hyps[s].begin() + i + n)];
      for (std::size_t i = 0; i + n <= refs[s].size(); ++i) ++g[Sentence(refs[s].begin() + i, refs[s].begin() + i + n)];
      for (const auto& [gram, count] : h) {
        total[n - 1] += count;
        match[n - 1] += std::min(count, g.count(gram) ? g[gram] : 0);
      }
    }
  }
  double log_sum = 0;
  for (int n = 0; n < 4; ++n) {
    if (match[n] == 0) return 0;
    log_sum += std::log(match[n] / total[n]);
  }
  const double bp = c > r ? 1.0 : std::exp(1 - r / c);
  return 100 * bp * std::exp(log_sum / 4);
}

std::vector<Sentence> random_sentences(Rng& rng, int count, int vocab, int max_len = 12) {
  std::vector<Sentence> out;
  for (int i = 0; i < count; ++i) {
    Sentence s;
    const int len = 1 + static_cast<int>(rng.below(max_len));
    for (int k = 0; k < len; ++k) s.push_back("w" + std::to_string(rng.below(vocab)));
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST_CASE("bleu examples") {
  CHECK(bleu({words("a b c d e")}, {words("a b c d e")}).bleu == 100.0);
  const auto clipped = bleu({words("the the the the the")}, {words("the cat")});
  CHECK(clipped.precisions[0] == doctest::Approx(0.2));
  CHECK(clipped.bleu == 0.0);
  const auto short_hyp = bleu({words("a b c d")}, {words("a b c d e")});
  CHECK(short_hyp.bleu_raw == doctest::Approx(77.88).epsilon(1e-4));
  CHECK(short_hyp.bleu == 77.88);
  CHECK(short_hyp.brevity_penalty == doctest::Approx(std::exp(-0.25)));
  for (double p : short_hyp.precisions) CHECK(p == 1.0);
}

TEST_CASE("bleu edge cases") {
  CHECK_THROWS_AS(bleu({words("a")}, {}), std::invalid_argument);
  CHECK(bleu({Sentence{}}, {words("a b c d")}).bleu == 0.0);
  CHECK(bleu({}, {}).bleu == 0.0);
}

TEST_CASE("bleu agrees with a textbook implementation") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(10));
    auto refs = random_sentences(rng, n, 6);
    auto hyps = random_sentences(rng, n, 6);
    CAPTURE(trial);
    CHECK(bleu(hyps, refs).bleu_raw == doctest::Approx(reference_bleu(hyps, refs)).epsilon(1e-12));
  }
}

TEST_CASE("bleu of a corpus against itself is 100") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto h = random_sentences(rng, 1 + static_cast<int>(rng.below(5)), 30);
    for (auto& s : h)
      while (s.size() < 4) s.push_back("x");
    CHECK(bleu(h, h).bleu == 100.0);
  }
}

TEST_CASE("bleu is invariant to reordering sentence pairs") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(10));
    auto refs = random_sentences(rng, n, 5);
    auto hyps = random_sentences(rng, n, 5);
    const double before = bleu(hyps, refs).bleu_raw;
    std::vector<std::size_t> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    std::vector<Sentence> h2, r2;
    for (auto i : order) {
      h2.push_back(hyps[i]);
      r2.push_back(refs[i]);
    }
    CHECK(bleu(h2, r2).bleu_raw == doctest::Approx(before).epsilon(1e-12));
    CHECK(before >= 0.0);
    CHECK(before <= 100.0);
  }
}

TEST_CASE("report records") {
  const auto r = bleu({words("a b c d")}, {words("a b c d e")});
  const std::string rec = r.to_records();
  CHECK(rec.find("bleu=77.88") != std::string::npos);
  CHECK(rec.find("hyp_length=4") != std::string::npos);
  CHECK(rec.find("ref_length=5") != std::string::npos);
  CHECK(r.to_text().rfind("BLEU = 77.88", 0) == 0);
}

TEST_CASE("bootstrap: identical systems are never significant") {
  Rng rng(4);
  const auto refs = random_sentences(rng, 60, 20);
  const auto hyps = random_sentences(rng, 60, 20);
  const auto r = bootstrap_significance(hyps, hyps, refs, 1000, 1);
  CHECK(r.p_value == 1.0);
  CHECK(r.num_resamples == 1000);
  CHECK(r.mean_delta == 0.0);
}

TEST_CASE("bootstrap: the reference beats random tokens") {
  Rng rng(5);
  const auto refs = random_sentences(rng, 100, 50);
  const auto noise = random_sentences(rng, 100, 50);
  const auto r = bootstrap_significance(noise, refs, refs, 1000, 1);
  CHECK(r.p_value < 0.01);
  CHECK(r.bleu_b == doctest::Approx(100.0));
  CHECK(r.delta_low <= r.mean_delta);
  CHECK(r.mean_delta <= r.delta_high);
  // reversed question: A better than B never holds
  CHECK(bootstrap_significance(refs, noise, refs, 1000, 1).p_value == 1.0);
}

TEST_CASE("bootstrap is seeded") {
  Rng rng(6);
  const auto refs = random_sentences(rng, 40, 8);
  const auto a = random_sentences(rng, 40, 8);
  auto b = a;
  for (int i = 0; i < 20; ++i) b[i] = refs[i];
  const auto x = bootstrap_significance(a, b, refs, 500, 9);
  const auto y = bootstrap_significance(a, b, refs, 500, 9);
  CHECK(x.p_value == y.p_value);
  CHECK(x.mean_delta == y.mean_delta);
  CHECK_THROWS_AS(bootstrap_significance(a, b, {}, 10, 1), std::invalid_argument);
}

TEST_CASE("slot scoring") {
  SlotMeta trg;
  trg.mode = SynthMode::TargetInformative;
  trg.doc_ids = {"d0", "d1"};
  trg.slots = {{{false, "E1_a"}, {true, "E1_a"}, {true, "E1_a"}}, {{false, "E2_b"}, {true, "E2_b"}}};
  // the system picked E1_b for the mention: consistent pronouns still count
  std::vector<std::vector<Sentence>> hyps = {{words("E1_b w"), words("E1_b w"), words("E1_a w")},
                                             {words("E3_a w"), words("E3_a w")}};
  auto s = score_slots(hyps, trg);
  CHECK(s.pronoun_slots == 3);
  CHECK(s.correct == 1);  // the wrong-entity antecedent in d1 scores nothing
  CHECK(s.accuracy() == doctest::Approx(1.0 / 3));

  SlotMeta src = trg;
  src.mode = SynthMode::SourceInformative;
  s = score_slots(hyps, src);
  CHECK(s.correct == 1);  // only "E1_a" in d0 sentence 3 matches gold

  hyps[0][1].clear();  // empty hypothesis is simply wrong
  CHECK(score_slots(hyps, trg).correct == 0);
  CHECK_THROWS_AS(score_slots({hyps[0]}, trg), std::invalid_argument);
  CHECK(SlotScore{}.accuracy() == 0.0);
}
