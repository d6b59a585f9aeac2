#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "ctxnmt/model.hpp"
#include "ctxnmt/trainer.hpp"

namespace ctxnmt {

using KeyValues = std::map<std::string, std::string>;

// "key = value" lines; '#' starts a comment. Throws std::runtime_error on a
// line without '=' or a repeated key.
KeyValues parse_key_values(std::string_view text);
KeyValues load_key_values(const std::filesystem::path& path);

// Every tunable of the pipeline. Defaults are the desk profile.
struct Settings {
  int embed_dim = 32;
  int hidden_dim = 32;
  int layers = 2;
  double dropout = 0.2;
  int merges = 200;
  int max_len = 100;
  int epochs = 30;
  double lr = 0.1;  // 0.01 at paper scale; stalls at this size
  int max_docs_per_batch = 16;
  double grad_clip_norm = 5.0;
  int beam_size = 1;
  double max_length_ratio = 2.0;
  int bootstrap_samples = 1000;
  std::uint64_t seed = 1;

  // Unknown keys and unparsable values throw std::runtime_error.
  void apply(const KeyValues& values);
  // Sorted key=value lines; apply(parse_key_values(to_text())) round-trips.
  std::string to_text() const;

  ModelConfig model_config(Variant variant, int source_vocab, int target_vocab) const;
  TrainConfig train_config() const;
  TranslateOptions translate_options() const;
};

}  // namespace ctxnmt
