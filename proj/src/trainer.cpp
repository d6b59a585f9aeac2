#include "ctxnmt/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "ctxnmt/bleu.hpp"
#include "ctxnmt/bpe.hpp"
#include "ctxnmt/optim.hpp"

namespace ctxnmt {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(lr > 0)) throw std::invalid_argument("lr must be > 0");
  if (!(dropout >= 0 && dropout < 1)) throw std::invalid_argument("dropout must satisfy 0 <= p < 1");
  if (max_docs_per_batch < 1) throw std::invalid_argument("max_docs_per_batch must be >= 1");
  if (!(grad_clip_norm > 0)) throw std::invalid_argument("grad_clip_norm must be > 0");
}

void TrainLog::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[128];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%d\t%.6f\t%.2f\t%.3f\n", e.epoch, e.loss, e.dev_bleu, e.seconds);
    out << buf;
  }
}

TrainLog TrainLog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  TrainLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    EpochRecord e;
    if (!(fields >> e.epoch >> e.loss >> e.dev_bleu >> e.seconds)) {
      throw std::runtime_error("malformed train log line: " + line);
    }
    log.epochs.push_back(e);
  }
  if (!log.epochs.empty()) log.best_epoch = select_best(log.epochs);
  return log;
}

int select_best(const std::vector<EpochRecord>& epochs) {
  if (epochs.empty()) throw std::invalid_argument("select_best: no completed epoch");
  int best = 0;
  for (int i = 1; i < static_cast<int>(epochs.size()); ++i)
    if (epochs[i].dev_bleu > epochs[best].dev_bleu) best = i;
  return best;
}

std::vector<std::vector<Sentence>> translate_corpus(const ModelParams<float>& params,
                                                    const std::vector<EncodedDocument>& docs,
                                                    const Vocabulary& target_vocab, const TranslateOptions& options,
                                                    TranslationStats* stats) {
  // inference never writes through the model
  Seq2Seq<float> model(const_cast<ModelParams<float>&>(params));
  std::vector<std::vector<Sentence>> out;
  out.reserve(docs.size());
  for (const auto& doc : docs) {
    std::vector<std::vector<int>> sources;
    for (const auto& pair : doc) sources.push_back(pair.source);
    auto ids = translate_document(model, sources, options, stats);
    std::vector<Sentence> sentences;
    for (const auto& s : ids) sentences.push_back(desegment_tokens(target_vocab.decode(s)));
    out.push_back(std::move(sentences));
  }
  return out;
}

double corpus_bleu(const std::vector<std::vector<Sentence>>& hypotheses,
                   const std::vector<std::vector<Sentence>>& references) {
  std::vector<Sentence> hyps, refs;
  for (const auto& d : hypotheses) hyps.insert(hyps.end(), d.begin(), d.end());
  for (const auto& d : references) refs.insert(refs.end(), d.begin(), d.end());
  return bleu(hyps, refs).bleu;
}

namespace {

// Gradients of the weights a context variant adds on top of the baseline.
void zero_context_grads(ModelParams<float>& p) {
  const int H = p.config.hidden_dim;
  auto& w = p.attention_hidden;
  if (w.cols() == 3 * H) {
    for (int r = 0; r < w.rows(); ++r)
      for (int c = 2 * H; c < 3 * H; ++c) w.grad[static_cast<std::size_t>(r) * w.cols() + c] = 0;
  }
  for (auto& layer : p.context_encoder) {
    for (auto* t : {&layer.w_input, &layer.w_hidden, &layer.bias}) std::fill(t->grad.begin(), t->grad.end(), 0.0f);
  }
}

}  // namespace

TrainResult train(ModelParams<float>& params, const TrainData& data, const TrainConfig& config,
                  const StepObserver& observer) {
  config.validate();
  if (data.train.empty()) throw std::invalid_argument("train: empty training corpus");
  if (!data.target_vocab) throw std::invalid_argument("train: target vocabulary required");
  if (data.dev.size() != data.dev_references.size()) throw std::invalid_argument("train: dev references misaligned");
  params.config.dropout = config.dropout;

  Seq2Seq<float> model(params);
  AdaGrad<float> optimizer(config.lr);
  const auto tensors = params.tensors();
  Rng master(config.seed);

  TrainResult result;
  double best_bleu = -1;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    Rng dropout_rng = master.fork(static_cast<std::uint64_t>(epoch));
    const auto batches =
        make_batches(data.train, config.max_docs_per_batch, config.seed * 1000003ULL + epoch, config.shuffle);
    double loss_total = 0;
    long long token_total = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      ContextCache<float> cache;
      for (const auto& position : batches[b].positions) {
        Graph<float> g(true);
        const bool cache_empty = cache.empty();
        auto fwd = model.forward_loss(g, position, cache, RunMode{true, &dropout_rng});
        const double loss_sum = g.scalar(fwd.loss_sum);
        if (!std::isfinite(loss_sum)) {
          throw std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(b) + ", sentence position " + std::to_string(position.position));
        }
        params.zero_grad();
        g.backward(fwd.loss);
        if (config.freeze_context_branch) zero_context_grads(params);
        const double norm = clip_grad_norm<float>(tensors, config.grad_clip_norm);
        optimizer.step(tensors);
        cache = model.next_cache(g, position, fwd);
        loss_total += loss_sum;
        token_total += fwd.tokens;
        if (observer) {
          observer({epoch, static_cast<int>(b), position.position, loss_sum / fwd.tokens, norm, fwd.tokens,
                    cache_empty});
        }
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.loss = loss_total / static_cast<double>(token_total);
    if (!data.dev.empty()) {
      record.dev_bleu = corpus_bleu(translate_corpus(params, data.dev, *data.target_vocab, config.dev_decoding),
                                    data.dev_references);
    }
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.epochs.push_back(record);
    if (record.dev_bleu > best_bleu) {
      best_bleu = record.dev_bleu;
      result.best = params;
      result.log.best_epoch = static_cast<int>(result.log.epochs.size()) - 1;
    }
  }
  for (auto* t : result.best.tensors()) std::fill(t->grad.begin(), t->grad.end(), 0.0f);
  return result;
}

TrainResult pretrain_baseline(const ModelConfig& model_config, const TrainData& data, const TrainConfig& config,
                              const StepObserver& observer) {
  ModelConfig mc = model_config;
  mc.variant = Variant::Baseline;
  mc.dropout = config.dropout;
  mc.validate();
  Rng init_rng(config.seed);
  ModelParams<float> params = ModelParams<float>::init(mc, init_rng);
  return train(params, data, config, observer);
}

ModelParams<float> init_from_baseline(const ModelParams<float>& baseline, Variant variant, std::uint64_t seed) {
  if (baseline.config.variant != Variant::Baseline) {
    throw std::invalid_argument("fine-tuning starts from a baseline checkpoint, got " +
                                std::string(to_string(baseline.config.variant)));
  }
  ModelConfig mc = baseline.config;
  mc.variant = variant;
  Rng rng(seed ^ 0x5eedc0de5eedc0deULL);
  ModelParams<float> out = ModelParams<float>::init(mc, rng);

  std::vector<std::pair<std::string, const Tensor<float>*>> src;
  baseline.for_each([&src](const std::string& name, const Tensor<float>& t) { src.emplace_back(name, &t); });
  std::size_t k = 0;
  out.for_each([&](const std::string& name, Tensor<float>& t) {
    if (name.rfind("context_encoder", 0) == 0) return;  // stays freshly drawn
    if (k >= src.size() || src[k].first != name) throw std::logic_error("init_from_baseline: layout mismatch at " + name);
    const Tensor<float>& s = *src[k++].second;
    if (name == "attention_hidden" && t.cols() != s.cols()) {
      const int H = mc.hidden_dim;
      for (int r = 0; r < t.rows(); ++r) {
        for (int c = 0; c < t.cols(); ++c) {
          t.data[static_cast<std::size_t>(r) * t.cols() + c] =
              c < 2 * H ? s.data[static_cast<std::size_t>(r) * s.cols() + c] : 0.0f;
        }
      }
      return;
    }
    if (t.shape != s.shape) throw std::logic_error("init_from_baseline: shape mismatch at " + name);
    t.data = s.data;
  });
  return out;
}

TrainResult fine_tune_context(const ModelParams<float>& baseline, Variant variant, const ModelConfig& expected,
                              const TrainData& data, const TrainConfig& config, const StepObserver& observer) {
  const ModelConfig& have = baseline.config;
  if (have.embed_dim != expected.embed_dim || have.hidden_dim != expected.hidden_dim ||
      have.source_vocab != expected.source_vocab || have.target_vocab != expected.target_vocab ||
      have.layers != expected.layers) {
    throw std::invalid_argument("baseline checkpoint does not match the corpus/config (E, H, vocabularies, layers)");
  }
  ModelParams<float> params = init_from_baseline(baseline, variant, config.seed);
  return train(params, data, config, observer);
}

}  // namespace ctxnmt
