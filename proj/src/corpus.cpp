#include "ctxnmt/corpus.hpp"

#include <fstream>
#include <stdexcept>

#include "ctxnmt/bpe.hpp"

namespace ctxnmt {

std::string join_tokens(const Sentence& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

std::vector<std::vector<Sentence>> read_blocks(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::vector<Sentence>> blocks;
  std::vector<Sentence> current;
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = split_whitespace(line);
    if (tokens.empty()) {
      if (!current.empty()) blocks.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(std::move(tokens));
    }
  }
  if (!current.empty()) blocks.push_back(std::move(current));
  return blocks;
}

void write_blocks(const std::vector<std::vector<Sentence>>& blocks, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (b) out << '\n';
    for (const auto& s : blocks[b]) out << join_tokens(s) << '\n';
  }
}

std::vector<Document> load_documents(const std::filesystem::path& source_path,
                                     const std::filesystem::path& target_path) {
  auto src = read_blocks(source_path);
  auto trg = read_blocks(target_path);
  if (src.size() != trg.size()) {
    throw std::runtime_error("document count mismatch: " + std::to_string(src.size()) + " source vs " +
                             std::to_string(trg.size()) + " target");
  }
  std::vector<Document> docs;
  docs.reserve(src.size());
  for (std::size_t d = 0; d < src.size(); ++d) {
    if (src[d].size() != trg[d].size()) {
      throw std::runtime_error("document " + std::to_string(d) + " is misaligned: " + std::to_string(src[d].size()) +
                               " source sentences vs " + std::to_string(trg[d].size()) + " target sentences");
    }
    Document doc;
    doc.id = "doc-" + std::to_string(d);
    for (std::size_t i = 0; i < src[d].size(); ++i) doc.pairs.push_back({std::move(src[d][i]), std::move(trg[d][i])});
    docs.push_back(std::move(doc));
  }
  return docs;
}

void save_documents(const std::vector<Document>& docs, const std::filesystem::path& source_path,
                    const std::filesystem::path& target_path) {
  std::vector<std::vector<Sentence>> src, trg;
  for (const auto& doc : docs) {
    if (doc.pairs.empty()) throw std::invalid_argument("cannot save empty document " + doc.id);
    auto& s = src.emplace_back();
    auto& t = trg.emplace_back();
    for (const auto& p : doc.pairs) {
      s.push_back(p.source);
      t.push_back(p.target);
    }
  }
  write_blocks(src, source_path);
  write_blocks(trg, target_path);
}

std::vector<Document> filter_documents(const std::vector<Document>& docs, int max_len) {
  std::vector<Document> kept;
  for (const auto& doc : docs) {
    bool ok = true;
    for (const auto& p : doc.pairs) {
      if (static_cast<int>(p.source.size()) > max_len || static_cast<int>(p.target.size()) > max_len) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(doc);
  }
  return kept;
}

}  // namespace ctxnmt
