#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ctxnmt {

// Hex SHA-1 of "blob <size>\0" + content, as git computes object ids.
std::string git_blob_hash(const std::string& content);
std::string git_blob_hash_file(const std::filesystem::path& path);

// Written next to every artifact-producing command's outputs.
struct RunManifest {
  std::string command;
  std::string config;  // Settings::to_text() snapshot
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, content hash
  std::vector<std::string> outputs;
  std::string timestamp;  // UTC, ISO 8601; the only non-reproducible field

  void add_input(const std::filesystem::path& path);
  std::string to_text() const;
  void save(const std::filesystem::path& path) const;
};

std::string utc_timestamp();

}  // namespace ctxnmt
