#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ctxnmt {

using Sentence = std::vector<std::string>;

struct SentencePair {
  Sentence source;
  Sentence target;

  friend bool operator==(const SentencePair&, const SentencePair&) = default;
};

// Ordered parallel sentences; the unit of context.
struct Document {
  std::string id;
  std::vector<SentencePair> pairs;

  std::size_t size() const { return pairs.size(); }
  friend bool operator==(const Document&, const Document&) = default;
};

// Paired plain-text files, one sentence per line, documents separated by one
// or more blank lines. Throws std::runtime_error when a document block has
// different sentence counts on the two sides.
std::vector<Document> load_documents(const std::filesystem::path& source_path,
                                     const std::filesystem::path& target_path);

void save_documents(const std::vector<Document>& docs, const std::filesystem::path& source_path,
                    const std::filesystem::path& target_path);

// Blank-line separated blocks of whitespace-tokenized lines.
std::vector<std::vector<Sentence>> read_blocks(const std::filesystem::path& path);
void write_blocks(const std::vector<std::vector<Sentence>>& blocks, const std::filesystem::path& path);

// Drops every document holding a sentence longer than max_len tokens on
// either side.
std::vector<Document> filter_documents(const std::vector<Document>& docs, int max_len = 100);

std::string join_tokens(const Sentence& tokens);

}  // namespace ctxnmt
