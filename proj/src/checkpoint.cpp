#include "ctxnmt/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctxnmt {

namespace {

constexpr const char* kMagic = "ctxnmt-checkpoint 1";

void put_f32(std::ostream& out, float v) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  const char bytes[4] = {static_cast<char>(bits & 0xFF), static_cast<char>((bits >> 8) & 0xFF),
                         static_cast<char>((bits >> 16) & 0xFF), static_cast<char>((bits >> 24) & 0xFF)};
  out.write(bytes, 4);
}

float get_f32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("checkpoint blob is truncated");
  const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                             (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return std::bit_cast<float>(bits);
}

template <typename T>
T expect_field(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint manifest ends before '" + key + "'");
  std::istringstream fields(line);
  std::string name;
  T value{};
  if (!(fields >> name >> value) || name != key) {
    throw std::runtime_error("checkpoint manifest: expected '" + key + "', got '" + line + "'");
  }
  return value;
}

}  // namespace

std::filesystem::path checkpoint_blob_path(const std::filesystem::path& manifest) {
  std::filesystem::path blob = manifest;
  blob += ".bin";
  return blob;
}

void save_checkpoint(const ModelParams<float>& params, const std::filesystem::path& path) {
  const auto& c = params.config;
  std::ofstream manifest(path, std::ios::binary);
  if (!manifest) throw std::runtime_error("cannot write checkpoint " + path.string());
  manifest << kMagic << '\n'
           << "variant " << to_string(c.variant) << '\n'
           << "embed_dim " << c.embed_dim << '\n'
           << "hidden_dim " << c.hidden_dim << '\n'
           << "source_vocab " << c.source_vocab << '\n'
           << "target_vocab " << c.target_vocab << '\n'
           << "layers " << c.layers << '\n'
           << "dropout " << c.dropout << '\n';
  std::size_t n = 0;
  params.for_each([&n](const std::string&, const Tensor<float>&) { ++n; });
  manifest << "tensors " << n << '\n';
  params.for_each([&manifest](const std::string& name, const Tensor<float>& t) {
    manifest << "tensor " << name;
    for (int d : t.shape) manifest << ' ' << d;
    manifest << '\n';
  });

  std::ofstream blob(checkpoint_blob_path(path), std::ios::binary);
  if (!blob) throw std::runtime_error("cannot write checkpoint blob for " + path.string());
  params.for_each([&blob](const std::string&, const Tensor<float>& t) {
    for (float v : t.data) put_f32(blob, v);
  });
}

ModelParams<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream manifest(path, std::ios::binary);
  if (!manifest) throw std::runtime_error("cannot read checkpoint " + path.string());
  std::string line;
  if (!std::getline(manifest, line) || line != kMagic) {
    throw std::runtime_error(path.string() + " is not a checkpoint manifest");
  }
  ModelConfig c;
  c.variant = parse_variant(expect_field<std::string>(manifest, "variant"));
  c.embed_dim = expect_field<int>(manifest, "embed_dim");
  c.hidden_dim = expect_field<int>(manifest, "hidden_dim");
  c.source_vocab = expect_field<int>(manifest, "source_vocab");
  c.target_vocab = expect_field<int>(manifest, "target_vocab");
  c.layers = expect_field<int>(manifest, "layers");
  c.dropout = expect_field<double>(manifest, "dropout");
  const auto count = expect_field<std::size_t>(manifest, "tensors");

  ModelParams<float> params = ModelParams<float>::zeros(c);
  std::vector<std::pair<std::string, Shape>> declared;
  for (std::size_t k = 0; k < count; ++k) {
    if (!std::getline(manifest, line)) throw std::runtime_error("checkpoint manifest lists fewer tensors than declared");
    std::istringstream fields(line);
    std::string tag, name;
    fields >> tag >> name;
    Shape shape;
    for (int d; fields >> d;) shape.push_back(d);
    if (tag != "tensor") throw std::runtime_error("checkpoint manifest: bad tensor line '" + line + "'");
    declared.emplace_back(name, shape);
  }
  std::size_t k = 0;
  params.for_each([&](const std::string& name, Tensor<float>& t) {
    if (k >= declared.size() || declared[k].first != name || declared[k].second != t.shape) {
      throw std::runtime_error("checkpoint tensor " + std::to_string(k) + " does not match expected " + name + " " +
                               shape_string(t.shape));
    }
    ++k;
  });
  if (k != declared.size()) throw std::runtime_error("checkpoint lists unexpected extra tensors");

  std::ifstream blob(checkpoint_blob_path(path), std::ios::binary);
  if (!blob) throw std::runtime_error("cannot read checkpoint blob for " + path.string());
  params.for_each([&blob](const std::string&, Tensor<float>& t) {
    for (float& v : t.data) v = get_f32(blob);
  });
  if (blob.peek() != std::char_traits<char>::eof()) throw std::runtime_error("checkpoint blob has trailing bytes");
  return params;
}

}  // namespace ctxnmt
