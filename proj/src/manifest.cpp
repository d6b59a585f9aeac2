#include "ctxnmt/manifest.hpp"

#include <openssl/sha.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctxnmt {

std::string git_blob_hash(const std::string& content) {
  const std::string object = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(object.data()), object.size(), digest);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned char b : digest) {
    out += hex[b >> 4];
    out += hex[b & 15];
  }
  return out;
}

std::string git_blob_hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return git_blob_hash(buf.str());
}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs.emplace_back(path.string(), git_blob_hash_file(path));
}

std::string RunManifest::to_text() const {
  std::string out = "command=" + command + "\n";
  out += "seed=" + std::to_string(seed) + "\n";
  out += "timestamp=" + timestamp + "\n";
  for (const auto& [path, hash] : inputs) out += "input=" + hash + " " + path + "\n";
  for (const auto& path : outputs) out += "output=" + path + "\n";
  std::istringstream cfg(config);
  std::string line;
  while (std::getline(cfg, line))
    if (!line.empty()) out += "config." + line + "\n";
  return out;
}

void RunManifest::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_text();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace ctxnmt
