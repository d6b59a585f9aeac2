#include "ctxnmt/batch.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "ctxnmt/rng.hpp"

namespace ctxnmt {

EncodedDocument encode_document(const Document& doc, const Vocabulary& source_vocab,
                                const Vocabulary& target_vocab) {
  EncodedDocument out;
  out.reserve(doc.pairs.size());
  for (const auto& p : doc.pairs) out.push_back({source_vocab.encode(p.source), target_vocab.encode(p.target)});
  return out;
}

std::vector<int> TokenMatrix::column(int c) const {
  std::vector<int> out(rows);
  for (int r = 0; r < rows; ++r) out[r] = at(r, c);
  return out;
}

std::vector<std::uint8_t> TokenMatrix::column_mask(int c) const {
  std::vector<std::uint8_t> out(rows);
  for (int r = 0; r < rows; ++r) out[r] = mask[static_cast<std::size_t>(r) * cols + c];
  return out;
}

int TokenMatrix::row_length(int r) const {
  int n = 0;
  for (int c = 0; c < cols; ++c) n += on(r, c) ? 1 : 0;
  return n;
}

TokenMatrix TokenMatrix::from_rows(const std::vector<std::vector<int>>& rows) {
  TokenMatrix m;
  m.rows = static_cast<int>(rows.size());
  for (const auto& r : rows) m.cols = std::max(m.cols, static_cast<int>(r.size()));
  m.cols = std::max(m.cols, 1);
  m.ids.assign(static_cast<std::size_t>(m.rows) * m.cols, Vocabulary::kPad);
  m.mask.assign(m.ids.size(), 0);
  for (int r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m.ids[static_cast<std::size_t>(r) * m.cols + c] = rows[r][c];
      m.mask[static_cast<std::size_t>(r) * m.cols + c] = 1;
    }
  return m;
}

int PositionBatch::target_tokens() const {
  int n = 0;
  for (auto m : target_output.mask) n += m;
  return n;
}

PositionBatch make_position_batch(const std::vector<const EncodedDocument*>& docs, int position) {
  PositionBatch pb;
  pb.position = position;
  std::vector<std::vector<int>> src, trg_in, trg_out;
  for (const auto* doc : docs) {
    const bool live = position < static_cast<int>(doc->size());
    pb.active.push_back(live ? 1 : 0);
    if (!live) {
      src.emplace_back();
      trg_in.emplace_back();
      trg_out.emplace_back();
      continue;
    }
    const auto& pair = (*doc)[position];
    src.push_back(pair.source);
    std::vector<int> in{Vocabulary::kBos};
    in.insert(in.end(), pair.target.begin(), pair.target.end());
    std::vector<int> out(pair.target.begin(), pair.target.end());
    out.push_back(Vocabulary::kEos);
    trg_in.push_back(std::move(in));
    trg_out.push_back(std::move(out));
  }
  pb.source = TokenMatrix::from_rows(src);
  pb.target_input = TokenMatrix::from_rows(trg_in);
  pb.target_output = TokenMatrix::from_rows(trg_out);
  return pb;
}

std::vector<DocumentBatch> make_batches(const std::vector<EncodedDocument>& docs, int max_docs, std::uint64_t seed,
                                        bool shuffle) {
  if (docs.empty()) throw std::invalid_argument("make_batches: no documents");
  if (max_docs < 1) throw std::invalid_argument("make_batches: max_docs must be >= 1");
  std::vector<std::size_t> order(docs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    Rng rng(seed);
    rng.shuffle(order);
  }
  std::vector<DocumentBatch> batches;
  for (std::size_t start = 0; start < order.size(); start += max_docs) {
    DocumentBatch batch;
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(max_docs));
    batch.documents.assign(order.begin() + start, order.begin() + end);
    std::vector<const EncodedDocument*> members;
    int longest = 0;
    for (auto idx : batch.documents) {
      if (docs[idx].empty()) throw std::invalid_argument("make_batches: empty document");
      members.push_back(&docs[idx]);
      longest = std::max(longest, static_cast<int>(docs[idx].size()));
    }
    for (int i = 0; i < longest; ++i) batch.positions.push_back(make_position_batch(members, i));
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace ctxnmt
