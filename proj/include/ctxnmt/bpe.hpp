#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ctxnmt {

inline constexpr std::string_view kEndOfWord = "</w>";
inline constexpr std::string_view kJoiner = "@@";

// Splits a UTF-8 string into code-point substrings. Invalid bytes become
// single-byte pieces.
std::vector<std::string> utf8_chars(std::string_view word);

std::vector<std::string> split_whitespace(std::string_view line);

// Byte-pair-encoding merge table. Words are segmented into characters plus a
// trailing end-of-word symbol; merges are applied in learned order.
class BpeModel {
 public:
  using Merge = std::pair<std::string, std::string>;

  BpeModel() = default;
  explicit BpeModel(std::vector<Merge> merges);

  // Greedy most-frequent-pair learning over whitespace-tokenized lines. Ties
  // go to the lexicographically smallest pair. Stops early when no pair is
  // left. Throws std::invalid_argument on an empty corpus or negative count.
  static BpeModel learn(const std::vector<std::string>& lines, int num_merges);

  const std::vector<Merge>& merges() const { return merges_; }

  // Symbols of one word after merging, end-of-word marker included.
  std::vector<std::string> segment_word(const std::string& word) const;

  // Subword tokens for a sentence; word-internal pieces carry a trailing "@@".
  std::vector<std::string> apply_tokens(std::string_view sentence) const;
  std::string apply(std::string_view sentence) const;

  void save(const std::filesystem::path& path) const;
  static BpeModel load(const std::filesystem::path& path);

 private:
  std::vector<Merge> merges_;
  std::unordered_map<std::string, int> rank_;  // "left\x1fright" -> order
  mutable std::unordered_map<std::string, std::vector<std::string>> cache_;
};

// Joins "@@ "-continued pieces back into words.
std::string desegment(std::string_view segmented);
std::vector<std::string> desegment_tokens(const std::vector<std::string>& pieces);

}  // namespace ctxnmt
