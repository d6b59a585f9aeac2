#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace ctxnmt {

// Token <-> id map. Ids 0..3 are reserved; the remaining ids are assigned by
// descending frequency, then lexicographically.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kReserved = 4;

  Vocabulary();

  static Vocabulary build(const std::vector<std::vector<std::string>>& sentences);

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(const std::string& token) const;
  bool contains(const std::string& token) const { return ids_.contains(token); }
  const std::string& token(int id) const;

  std::vector<int> encode(std::span<const std::string> tokens) const;
  // Stops at the first EOS; PAD and BOS are dropped.
  std::vector<std::string> decode(std::span<const int> ids) const;

  // One non-reserved token per line; line k (0-based) holds id k + 4.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

}  // namespace ctxnmt
