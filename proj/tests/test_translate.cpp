#include <doctest.h>

#include <filesystem>
#include <map>

#include "ctxnmt/checkpoint.hpp"
#include "ctxnmt/translate.hpp"
#include "fixtures.hpp"

using namespace ctxnmt;
namespace fs = std::filesystem;

namespace {

// Plain argmax loop over decode_step, PAD and BOS never emitted.
std::vector<int> greedy_oracle(const Seq2Seq<double>& model, const std::vector<int>& source,
                               const ContextCache<double>& cache, double ratio) {
  Graph<double> g(false);
  auto enc = model.encode(g, TokenMatrix::from_rows({source}), RunMode{});
  auto view = model.context_view(g, cache, RunMode{});
  auto carry = model.initial_carry(g, enc);
  std::vector<int> out;
  int prev = Vocabulary::kBos;
  const int limit = static_cast<int>(ratio * source.size());
  for (int step = 0; step < limit; ++step) {
    auto r = model.decode_step(g, std::vector<int>{prev}, carry, enc, view, RunMode{});
    carry = r.carry;
    const auto logits = g.value(r.logits);
    int best = -1;
    for (int v = 0; v < static_cast<int>(logits.size()); ++v) {
      if (v == Vocabulary::kPad || v == Vocabulary::kBos) continue;
      if (best < 0 || logits[v] > logits[best]) best = v;
    }
    if (best == Vocabulary::kEos) break;
    out.push_back(best);
    prev = best;
  }
  return out;
}

std::vector<std::vector<int>> random_sources(Rng& rng, int n, int vocab = 12) {
  std::vector<std::vector<int>> out;
  for (int i = 0; i < n; ++i) {
    std::vector<int> s;
    const int len = 1 + static_cast<int>(rng.below(5));
    for (int k = 0; k < len; ++k) s.push_back(Vocabulary::kReserved + static_cast<int>(rng.below(vocab - 4)));
    out.push_back(s);
  }
  return out;
}

// A model whose output projection favours EOS a little, so hypotheses end.
ModelParams<double> model_params(Variant v, std::uint64_t seed) {
  Rng rng(seed);
  auto p = ModelParams<double>::init(fixtures::tiny_config(v), rng);
  for (auto& x : p.output_projection.data) x *= 10;
  return p;
}

}  // namespace

TEST_CASE("beam size 1 is greedy decoding") {
  int nonempty = 0, finished = 0, total = 0;
  for (Variant v : kAllVariants) {
    CAPTURE(to_string(v));
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto p = model_params(v, seed);
      Seq2Seq<double> model(p);
      Rng rng(seed + 100);
      for (const auto& src : random_sources(rng, 4)) {
        const auto hyp = translate_sentence(model, src, ContextCache<double>{}, TranslateOptions{});
        CHECK(hyp.tokens == greedy_oracle(model, src, {}, 2.0));
        CHECK(hyp.tokens.size() <= 2 * src.size());
        nonempty += hyp.tokens.empty() ? 0 : 1;
        finished += hyp.finished ? 1 : 0;
        ++total;
      }
    }
  }
  // the fixture produces a mix of short, long and cut-off outputs
  CHECK(nonempty > total / 2);
  CHECK(finished > 0);
  CHECK(finished < total);
}

TEST_CASE("document translation feeds each sentence the previous one's context") {
  // oracle: sentence-by-sentence greedy with caches assembled by hand
  for (Variant v : kAllVariants) {
    CAPTURE(to_string(v));
    auto p = model_params(v, 3);
    Seq2Seq<double> model(p);
    Rng rng(7);
    const auto doc = random_sources(rng, 4);
    const auto out = translate_document(model, doc);
    ContextCache<double> cache;
    for (std::size_t i = 0; i < doc.size(); ++i) {
      StateMemory<double> enc;
      const auto hyp = translate_sentence(model, doc[i], cache, TranslateOptions{}, &enc);
      CHECK(hyp.tokens == out[i]);
      CHECK(greedy_oracle(model, doc[i], cache, 2.0) == out[i]);
      StateMemory<double> dec;
      if (hyp.top_states.size() > 1) {
        dec = {1, static_cast<int>(hyp.top_states.size()) - 1, 4, {}, {}};
        for (std::size_t k = 1; k < hyp.top_states.size(); ++k)
          dec.values.insert(dec.values.end(), hyp.top_states[k].begin(), hyp.top_states[k].end());
        dec.mask.assign(dec.length, 1);
      }
      auto produced = hyp.tokens;
      if (hyp.finished) produced.push_back(Vocabulary::kEos);
      const auto ps = TokenMatrix::from_rows({doc[i]}), pt = TokenMatrix::from_rows({produced});
      cache = make_context_cache<double>(v, &ps, &pt, &enc, &dec);
    }
  }
}

TEST_CASE("shared variants reuse saved states instead of recomputing them") {
  for (Variant v : kAllVariants) {
    CAPTURE(to_string(v));
    auto p = model_params(v, 4);
    Seq2Seq<double> model(p);
    Rng rng(8);
    for (int n = 1; n <= 5; ++n) {
      TranslationStats stats;
      translate_document(model, random_sources(rng, n), {}, &stats);
      CHECK(stats.sentences == n);
      CHECK(stats.encoder_runs == n);  // one encoder pass per sentence, never for the context
      if (!has_context(v)) {
        CHECK(stats.cache_hits == 0);
        CHECK(stats.context_encoder_runs == 0);
      } else if (is_separated(v)) {
        CHECK(stats.context_encoder_runs == n - 1);
      } else {
        CHECK(stats.cache_hits == n - 1);
        CHECK(stats.context_encoder_runs == 0);
      }
    }
  }
}

TEST_CASE("single-sentence documents translate identically under every variant") {
  Rng rng(9);
  const auto sources = random_sources(rng, 10);
  auto base = model_params(Variant::Baseline, 5);
  Seq2Seq<double> base_model(base);
  for (Variant v : kAllVariants) {
    auto p = model_params(v, 6);
    // share every non-context weight with the baseline
    std::map<std::string, const Tensor<double>*> src;
    base.for_each([&](const std::string& n, const Tensor<double>& t) { src[n] = &t; });
    p.for_each([&](const std::string& n, Tensor<double>& t) {
      if (n == "attention_hidden") {
        for (int r = 0; r < t.rows(); ++r)
          for (int c = 0; c < 8; ++c) t.data[r * t.cols() + c] = src[n]->data[r * 8 + c];
      } else if (src.count(n)) {
        t.data = src[n]->data;
      }
    });
    Seq2Seq<double> model(p);
    for (const auto& s : sources) CHECK(translate_document(model, {s}) == translate_document(base_model, {s}));
  }
}

TEST_CASE("a translation is unaffected by later changes to the cache it used") {
  auto p = model_params(Variant::SharedMix, 10);
  Seq2Seq<double> model(p);
  Rng rng(10);
  const auto doc = random_sources(rng, 2);
  StateMemory<double> enc;
  const auto first = translate_sentence(model, doc[0], {}, TranslateOptions{}, &enc);
  StateMemory<double> dec{1, 1, 4, first.top_states.back(), {1}};
  const auto ps = TokenMatrix::from_rows({doc[0]});
  auto cache = make_context_cache<double>(Variant::SharedMix, &ps, &ps, &enc, &dec);
  const auto hyp = translate_sentence(model, doc[1], cache, TranslateOptions{});
  const auto recorded = hyp.tokens;
  for (auto& x : cache.source.values) x = 123.0;
  CHECK(hyp.tokens == recorded);
  CHECK(enc.values != cache.source.values);  // the cache holds a copy
}

TEST_CASE("beam search") {
  for (Variant v : kAllVariants) {
    auto p = model_params(v, 11);
    Seq2Seq<double> model(p);
    Rng rng(11);
    const auto doc = random_sources(rng, 3);
    TranslateOptions wide{4, 2.0};
    const auto a = translate_document(model, doc, wide);
    CHECK(a == translate_document(model, doc, wide));
    for (std::size_t i = 0; i < doc.size(); ++i) CHECK(a[i].size() <= 2 * doc[i].size());
  }
  auto p = model_params(Variant::Baseline, 1);
  Seq2Seq<double> model(p);
  CHECK_THROWS_AS(translate_sentence(model, {5}, {}, TranslateOptions{0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(translate_sentence(model, {}, {}, TranslateOptions{}), std::invalid_argument);
}

TEST_CASE("checkpoint round trip") {
  const auto path = fs::temp_directory_path() / "ctxnmt_translate_ckpt";
  for (Variant v : kAllVariants) {
    CAPTURE(to_string(v));
    Rng rng(12);
    auto cfg = fixtures::tiny_config(v, 15, 6);
    cfg.target_vocab = 17;
    const auto p = ModelParams<float>::init(cfg, rng);
    save_checkpoint(p, path);
    auto q = load_checkpoint(path);
    CHECK(q.config == p.config);
    std::vector<std::vector<float>> a, b;
    p.for_each([&](const std::string&, const Tensor<float>& t) { a.push_back(t.data); });
    q.for_each([&](const std::string&, const Tensor<float>& t) { b.push_back(t.data); });
    CHECK(a == b);

    auto p2 = p;
    Seq2Seq<float> m1(p2), m2(q);
    Rng src(13);
    const auto doc = random_sources(src, 3, 15);
    CHECK(translate_document(m1, doc) == translate_document(m2, doc));
  }
  fs::resize_file(checkpoint_blob_path(path), fs::file_size(checkpoint_blob_path(path)) - 4);
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  fs::remove(path);
  fs::remove(checkpoint_blob_path(path));
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
}
