#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ctxnmt/batch.hpp"
#include "ctxnmt/model.hpp"
#include "ctxnmt/translate.hpp"

namespace ctxnmt {

struct TrainConfig {
  int epochs = 30;
  double lr = 0.01;
  double dropout = 0.2;
  int max_docs_per_batch = 128;
  double grad_clip_norm = 5.0;
  std::uint64_t seed = 1;
  // Zero the gradients of the new context weights after every backward pass,
  // so the context branch never moves.
  bool freeze_context_branch = false;
  bool shuffle = true;
  TranslateOptions dev_decoding{};

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;         // 1-based
  double loss = 0;       // mean NLL per target token over the epoch
  double dev_bleu = 0;
  double seconds = 0;    // wall time of the epoch, training plus dev decoding
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // index into epochs

  // epoch<TAB>loss<TAB>dev_bleu<TAB>seconds, one line per epoch
  void save(const std::filesystem::path& path) const;
  static TrainLog load(const std::filesystem::path& path);
};

// Index of the highest dev BLEU; ties go to the earliest epoch. Throws on an
// empty log.
int select_best(const std::vector<EpochRecord>& epochs);

template <typename T>
const T& select_best(const TrainLog& log, const std::vector<T>& checkpoints) {
  if (checkpoints.size() != log.epochs.size()) throw std::invalid_argument("select_best: one checkpoint per epoch");
  return checkpoints.at(static_cast<std::size_t>(select_best(log.epochs)));
}

struct TrainData {
  std::vector<EncodedDocument> train;
  std::vector<EncodedDocument> dev;
  std::vector<std::vector<Sentence>> dev_references;  // per document, desegmented words
  const Vocabulary* target_vocab = nullptr;
};

// Reported after every parameter update.
struct StepEvent {
  int epoch = 0;
  int batch = 0;
  int position = 0;
  double loss = 0;          // mean per token for this position
  double grad_norm = 0;     // before clipping
  int tokens = 0;
  bool cache_empty = true;  // context consumed by this position
};
using StepObserver = std::function<void(const StepEvent&)>;

struct TrainResult {
  ModelParams<float> best;
  TrainLog log;
};

// Continues training `params` in place for config.epochs epochs and returns the
// best-dev snapshot. Throws std::runtime_error on a non-finite loss.
TrainResult train(ModelParams<float>& params, const TrainData& data, const TrainConfig& config,
                  const StepObserver& observer = {});

TrainResult pretrain_baseline(const ModelConfig& model_config, const TrainData& data, const TrainConfig& config,
                              const StepObserver& observer = {});

// Context model initialized from a baseline: shared weights copied, the third
// block of attention_hidden zeroed, and the context encoder (separated
// variants) drawn uniformly. Throws std::invalid_argument when the baseline
// does not match `expected` in sizes or is not a baseline.
ModelParams<float> init_from_baseline(const ModelParams<float>& baseline, Variant variant, std::uint64_t seed);

TrainResult fine_tune_context(const ModelParams<float>& baseline, Variant variant, const ModelConfig& expected,
                              const TrainData& data, const TrainConfig& config, const StepObserver& observer = {});

// Greedy/beam translation of every document followed by corpus BLEU against
// desegmented references.
std::vector<std::vector<Sentence>> translate_corpus(const ModelParams<float>& params,
                                                    const std::vector<EncodedDocument>& docs,
                                                    const Vocabulary& target_vocab, const TranslateOptions& options,
                                                    TranslationStats* stats = nullptr);
double corpus_bleu(const std::vector<std::vector<Sentence>>& hypotheses,
                   const std::vector<std::vector<Sentence>>& references);

}  // namespace ctxnmt
