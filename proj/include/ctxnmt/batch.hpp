#pragma once

#include <cstdint>
#include <vector>

#include "ctxnmt/corpus.hpp"
#include "ctxnmt/vocab.hpp"

namespace ctxnmt {

struct EncodedPair {
  std::vector<int> source;
  std::vector<int> target;
};
using EncodedDocument = std::vector<EncodedPair>;

EncodedDocument encode_document(const Document& doc, const Vocabulary& source_vocab, const Vocabulary& target_vocab);

// Padded [rows x cols] id matrix; mask is 1 on real tokens, 0 on PAD.
struct TokenMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> ids;
  std::vector<std::uint8_t> mask;

  bool empty() const { return rows == 0 || cols == 0; }
  int at(int r, int c) const { return ids[static_cast<std::size_t>(r) * cols + c]; }
  bool on(int r, int c) const { return mask[static_cast<std::size_t>(r) * cols + c] != 0; }
  // ids of column c across rows
  std::vector<int> column(int c) const;
  std::vector<std::uint8_t> column_mask(int c) const;
  int row_length(int r) const;

  static TokenMatrix from_rows(const std::vector<std::vector<int>>& rows);
};

// Sentence position i of every document in a batch. Rows of exhausted
// documents are fully masked.
struct PositionBatch {
  int position = 0;  // 0-based sentence index
  std::vector<std::uint8_t> active;
  TokenMatrix source;
  TokenMatrix target_input;   // BOS y_1 .. y_N
  TokenMatrix target_output;  // y_1 .. y_N EOS

  int batch_size() const { return static_cast<int>(active.size()); }
  int target_tokens() const;
};

PositionBatch make_position_batch(const std::vector<const EncodedDocument*>& docs, int position);

struct DocumentBatch {
  std::vector<std::size_t> documents;  // indices into the corpus
  std::vector<PositionBatch> positions;

  int size() const { return static_cast<int>(documents.size()); }
};

// Groups documents into batches of at most max_docs. With shuffle, the order
// is a seeded permutation; otherwise corpus order.
std::vector<DocumentBatch> make_batches(const std::vector<EncodedDocument>& docs, int max_docs,
                                        std::uint64_t seed, bool shuffle = true);

}  // namespace ctxnmt
