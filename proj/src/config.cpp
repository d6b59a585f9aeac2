#include "ctxnmt/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctxnmt {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw std::runtime_error("config: bad value for " + key + ": '" + text + "'");
  return value;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw std::runtime_error("config line " + std::to_string(number) + ": expected key=value");
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw std::runtime_error("config line " + std::to_string(number) + ": empty key");
    if (!out.emplace(key, value).second) throw std::runtime_error("config: duplicate key " + key);
  }
  return out;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_key_values(buf.str());
}

void Settings::apply(const KeyValues& values) {
  for (const auto& [key, value] : values) {
    if (key == "embed_dim") embed_dim = parse_number<int>(key, value);
    else if (key == "hidden_dim") hidden_dim = parse_number<int>(key, value);
    else if (key == "layers") layers = parse_number<int>(key, value);
    else if (key == "dropout") dropout = parse_number<double>(key, value);
    else if (key == "merges") merges = parse_number<int>(key, value);
    else if (key == "max_len") max_len = parse_number<int>(key, value);
    else if (key == "epochs") epochs = parse_number<int>(key, value);
    else if (key == "lr") lr = parse_number<double>(key, value);
    else if (key == "max_docs_per_batch") max_docs_per_batch = parse_number<int>(key, value);
    else if (key == "grad_clip_norm") grad_clip_norm = parse_number<double>(key, value);
    else if (key == "beam_size") beam_size = parse_number<int>(key, value);
    else if (key == "max_length_ratio") max_length_ratio = parse_number<double>(key, value);
    else if (key == "bootstrap_samples") bootstrap_samples = parse_number<int>(key, value);
    else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
    else throw std::runtime_error("config: unknown key " + key);
  }
}

std::string Settings::to_text() const {
  KeyValues kv{
      {"embed_dim", std::to_string(embed_dim)},
      {"hidden_dim", std::to_string(hidden_dim)},
      {"layers", std::to_string(layers)},
      {"dropout", format_double(dropout)},
      {"merges", std::to_string(merges)},
      {"max_len", std::to_string(max_len)},
      {"epochs", std::to_string(epochs)},
      {"lr", format_double(lr)},
      {"max_docs_per_batch", std::to_string(max_docs_per_batch)},
      {"grad_clip_norm", format_double(grad_clip_norm)},
      {"beam_size", std::to_string(beam_size)},
      {"max_length_ratio", format_double(max_length_ratio)},
      {"bootstrap_samples", std::to_string(bootstrap_samples)},
      {"seed", std::to_string(seed)},
  };
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

ModelConfig Settings::model_config(Variant variant, int source_vocab, int target_vocab) const {
  ModelConfig c;
  c.variant = variant;
  c.embed_dim = embed_dim;
  c.hidden_dim = hidden_dim;
  c.layers = layers;
  c.dropout = dropout;
  c.source_vocab = source_vocab;
  c.target_vocab = target_vocab;
  return c;
}

TrainConfig Settings::train_config() const {
  TrainConfig c;
  c.epochs = epochs;
  c.lr = lr;
  c.dropout = dropout;
  c.max_docs_per_batch = max_docs_per_batch;
  c.grad_clip_norm = grad_clip_norm;
  c.seed = seed;
  c.dev_decoding = translate_options();
  return c;
}

TranslateOptions Settings::translate_options() const {
  TranslateOptions o;
  o.beam_size = beam_size;
  o.max_length_ratio = max_length_ratio;
  return o;
}

}  // namespace ctxnmt
