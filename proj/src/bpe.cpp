#include "ctxnmt/bpe.hpp"

#include <fstream>
#include <map>
#include <stdexcept>

namespace ctxnmt {

namespace {

std::string pair_key(const std::string& left, const std::string& right) { return left + '\x1f' + right; }

std::vector<std::string> initial_symbols(const std::string& word) {
  auto symbols = utf8_chars(word);
  symbols.emplace_back(kEndOfWord);
  return symbols;
}

void merge_in_place(std::vector<std::string>& symbols, const std::string& left, const std::string& right) {
  std::vector<std::string> merged;
  merged.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
      merged.push_back(left + right);
      ++i;
    } else {
      merged.push_back(std::move(symbols[i]));
    }
  }
  symbols = std::move(merged);
}

}  // namespace

std::vector<std::string> utf8_chars(std::string_view word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    const auto lead = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if (lead >= 0xF0 && lead < 0xF8) len = 4;
    else if (lead >= 0xE0) len = lead < 0xF0 ? 3 : 1;
    else if (lead >= 0xC0) len = 2;
    if (i + len > word.size()) len = 1;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(word[i + k]) & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    out.emplace_back(word.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<std::string> split_whitespace(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; };
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

BpeModel::BpeModel(std::vector<Merge> merges) : merges_(std::move(merges)) {
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    auto [it, inserted] = rank_.emplace(pair_key(merges_[r].first, merges_[r].second), static_cast<int>(r));
    if (!inserted) throw std::invalid_argument("BPE merge listed twice: " + merges_[r].first + " " + merges_[r].second);
  }
}

BpeModel BpeModel::learn(const std::vector<std::string>& lines, int num_merges) {
  if (num_merges < 0) throw std::invalid_argument("learn_bpe: num_merges must be >= 0");
  std::map<std::string, long long> word_counts;
  for (const auto& line : lines)
    for (auto& w : split_whitespace(line)) ++word_counts[w];
  if (word_counts.empty()) throw std::invalid_argument("learn_bpe: empty corpus");

  std::vector<std::pair<std::vector<std::string>, long long>> words;
  words.reserve(word_counts.size());
  for (const auto& [w, n] : word_counts) words.emplace_back(initial_symbols(w), n);

  std::vector<Merge> merges;
  for (int step = 0; step < num_merges; ++step) {
    std::map<Merge, long long> pair_counts;
    for (const auto& [symbols, n] : words)
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) pair_counts[{symbols[i], symbols[i + 1]}] += n;
    if (pair_counts.empty()) break;
    // std::map iterates pairs in lexicographic order, so the first maximum wins ties
    auto best = pair_counts.begin();
    for (auto it = pair_counts.begin(); it != pair_counts.end(); ++it)
      if (it->second > best->second) best = it;
    const Merge chosen = best->first;
    for (auto& [symbols, n] : words) merge_in_place(symbols, chosen.first, chosen.second);
    merges.push_back(chosen);
  }
  return BpeModel(std::move(merges));
}

std::vector<std::string> BpeModel::segment_word(const std::string& word) const {
  if (auto it = cache_.find(word); it != cache_.end()) return it->second;
  auto symbols = initial_symbols(word);
  while (symbols.size() > 1) {
    int best_rank = -1;
    std::size_t best_pos = 0;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = rank_.find(pair_key(symbols[i], symbols[i + 1]));
      if (it != rank_.end() && (best_rank < 0 || it->second < best_rank)) {
        best_rank = it->second;
        best_pos = i;
      }
    }
    if (best_rank < 0) break;
    const std::string left = symbols[best_pos], right = symbols[best_pos + 1];
    merge_in_place(symbols, left, right);
  }
  cache_.emplace(word, symbols);
  return symbols;
}

std::vector<std::string> BpeModel::apply_tokens(std::string_view sentence) const {
  std::vector<std::string> out;
  for (const auto& word : split_whitespace(sentence)) {
    auto symbols = segment_word(word);
    // strip the end-of-word marker from the final piece
    std::string& last = symbols.back();
    if (last == kEndOfWord) {
      symbols.pop_back();
    } else if (last.size() > kEndOfWord.size() && last.ends_with(kEndOfWord)) {
      last.resize(last.size() - kEndOfWord.size());
    }
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      out.push_back(i + 1 < symbols.size() ? symbols[i] + std::string(kJoiner) : symbols[i]);
    }
  }
  return out;
}

std::string BpeModel::apply(std::string_view sentence) const {
  std::string out;
  for (const auto& piece : apply_tokens(sentence)) {
    if (!out.empty()) out += ' ';
    out += piece;
  }
  return out;
}

void BpeModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write BPE model " + path.string());
  for (const auto& [left, right] : merges_) out << left << ' ' << right << '\n';
}

BpeModel BpeModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read BPE model " + path.string());
  std::vector<Merge> merges;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto parts = split_whitespace(line);
    if (parts.size() != 2) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected \"left right\"");
    }
    merges.emplace_back(parts[0], parts[1]);
  }
  return BpeModel(std::move(merges));
}

std::vector<std::string> desegment_tokens(const std::vector<std::string>& pieces) {
  std::vector<std::string> words;
  std::string current;
  bool open = false;
  for (const auto& piece : pieces) {
    if (piece.size() >= kJoiner.size() && piece.ends_with(kJoiner)) {
      current += piece.substr(0, piece.size() - kJoiner.size());
      open = true;
    } else {
      current += piece;
      words.push_back(std::move(current));
      current.clear();
      open = false;
    }
  }
  if (open) words.push_back(std::move(current));
  return words;
}

std::string desegment(std::string_view segmented) {
  std::string out;
  for (const auto& w : desegment_tokens(split_whitespace(segmented))) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace ctxnmt
