#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ctxnmt/batch.hpp"
#include "ctxnmt/graph.hpp"
#include "ctxnmt/lstm.hpp"

namespace ctxnmt {

enum class Variant { Baseline, SeparatedSource, SeparatedTarget, SharedSource, SharedTarget, SharedMix };

inline constexpr std::array<Variant, 6> kAllVariants = {Variant::Baseline,     Variant::SeparatedSource,
                                                        Variant::SeparatedTarget, Variant::SharedSource,
                                                        Variant::SharedTarget, Variant::SharedMix};

std::string_view to_string(Variant v);
// Accepts the kebab-case names printed by to_string.
Variant parse_variant(std::string_view text);

constexpr bool has_context(Variant v) { return v != Variant::Baseline; }
constexpr bool is_separated(Variant v) { return v == Variant::SeparatedSource || v == Variant::SeparatedTarget; }
constexpr bool reads_source_context(Variant v) {
  return v == Variant::SeparatedSource || v == Variant::SharedSource || v == Variant::SharedMix;
}
constexpr bool reads_target_context(Variant v) {
  return v == Variant::SeparatedTarget || v == Variant::SharedTarget || v == Variant::SharedMix;
}

struct ModelConfig {
  Variant variant = Variant::Baseline;
  int embed_dim = 32;
  int hidden_dim = 32;  // must be even: each encoder direction has hidden_dim / 2 units
  int source_vocab = 0;
  int target_vocab = 0;
  int layers = 2;
  double dropout = 0.2;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Exact number of scalar parameters of `variant` under the sizes in `config`.
long long param_count(Variant variant, const ModelConfig& config);

inline constexpr double kInitScale = 0.08;
inline constexpr double kForgetBias = 1.0;

template <typename Real>
struct ModelParams {
  ModelConfig config;
  Tensor<Real> source_embedding;                     // [V_src x E]
  Tensor<Real> target_embedding;                     // [V_trg x E]
  std::vector<LstmWeights<Real>> encoder_forward;    // hidden H/2 per layer
  std::vector<LstmWeights<Real>> encoder_backward;   // hidden H/2 per layer
  std::vector<LstmWeights<Real>> decoder;            // hidden H per layer
  std::vector<LstmWeights<Real>> context_encoder;    // separated variants only
  Tensor<Real> attention_hidden;                     // [H x 2H] baseline, [H x 3H] context variants
  Tensor<Real> output_projection;                    // [V_trg x H]

  static ModelParams init(const ModelConfig& config, Rng& rng);
  static ModelParams zeros(const ModelConfig& config);

  // Visits (name, tensor) in serialization order.
  template <typename Fn>
  void for_each(Fn&& fn);
  template <typename Fn>
  void for_each(Fn&& fn) const;

  std::vector<Tensor<Real>*> tensors();
  long long count() const;
  void zero_grad();

  template <typename To>
  ModelParams<To> cast() const;
};

// Per-token states saved from a previous sentence, detached from any graph.
template <typename Real>
struct StateMemory {
  int batch = 0;
  int length = 0;
  int dim = 0;
  std::vector<Real> values;         // [batch x length x dim]
  std::vector<std::uint8_t> mask;   // [batch x length]

  bool empty() const { return length == 0; }
  static StateMemory capture(const Graph<Real>& g, Var states, std::span<const std::uint8_t> mask);
  StateMemory repeat_rows(int rows) const;  // requires batch == 1
};

// Context from sentence i-1. Shared variants keep states (source: encoder
// states over X^{i-1}; target: top decoder states after reading each token
// of Y^{i-1}). Separated
// variants keep the previous sentence's tokens, which their own context
// encoder reads inside the current sentence's graph. Empty for i = 1.
template <typename Real>
struct ContextCache {
  StateMemory<Real> source;
  StateMemory<Real> target;
  TokenMatrix tokens;

  bool empty() const { return source.empty() && target.empty() && tokens.empty(); }
};

// Builds the cache consumed by sentence i. Pass nullptr for every input when
// building for the first sentence. Throws std::invalid_argument when the
// variant needs an input that is missing.
template <typename Real>
ContextCache<Real> make_context_cache(Variant variant, const TokenMatrix* prev_source, const TokenMatrix* prev_target,
                                      const StateMemory<Real>* prev_encoder, const StateMemory<Real>* prev_decoder);

template <typename Real>
struct EncoderStates {
  Var states;  // [B x M x H]
  std::vector<std::uint8_t> mask;
  int batch = 0;
  int length = 0;
  std::vector<LstmState<Real>> final;  // per layer, forward|backward halves
};

// Context memories materialized in a graph.
template <typename Real>
struct ContextView {
  std::vector<Var> memories;  // each [B x T x H]
  std::vector<std::vector<std::uint8_t>> masks;
};

template <typename Real>
struct StepResult {
  Var logits;        // [B x V_trg]
  Var top_state;     // h_n, [B x H]
  Var attn_hidden;   // h~_n, [B x H]
  Var alpha;         // [B x M]
  std::vector<Var> betas;
  Var context;       // c^{i-1}, [B x H]; invalid for the baseline
  std::vector<LstmState<Real>> carry;
};

template <typename Real>
struct ForwardResult {
  Var loss;      // mean NLL over unmasked target tokens
  Var loss_sum;
  int tokens = 0;
  EncoderStates<Real> encoder;
  // [B x N x H] top-layer states under teacher forcing, one per target token:
  // state t is the step that read y_t. Invalid when every target is empty.
  Var decoder_states;
  std::vector<std::uint8_t> decoder_mask;
};

struct RunMode {
  bool training = false;
  Rng* rng = nullptr;  // required when training
};

// Attentional 2-layer LSTM encoder-decoder with optional previous-sentence
// attention. Holds a reference to its parameters.
template <typename Real>
class Seq2Seq {
 public:
  explicit Seq2Seq(ModelParams<Real>& params);

  const ModelConfig& config() const { return params_->config; }
  Variant variant() const { return params_->config.variant; }
  ModelParams<Real>& params() { return *params_; }

  EncoderStates<Real> encode(Graph<Real>& g, const TokenMatrix& source, const RunMode& mode) const;

  ContextView<Real> context_view(Graph<Real>& g, const ContextCache<Real>& cache, const RunMode& mode) const;

  std::vector<LstmState<Real>> initial_carry(Graph<Real>& g, const EncoderStates<Real>& enc) const;

  StepResult<Real> decode_step(Graph<Real>& g, std::span<const int> prev_tokens,
                               const std::vector<LstmState<Real>>& carry, const EncoderStates<Real>& enc,
                               const ContextView<Real>& context, const RunMode& mode) const;

  // Teacher-forced loss for one sentence position of a batch. Throws
  // std::invalid_argument when the position has no target tokens.
  ForwardResult<Real> forward_loss(Graph<Real>& g, const PositionBatch& batch, const ContextCache<Real>& cache,
                                   const RunMode& mode) const;

  // Cache for the next position after forward_loss on `batch`.
  ContextCache<Real> next_cache(const Graph<Real>& g, const PositionBatch& batch,
                                const ForwardResult<Real>& result) const;

 private:
  std::vector<Var> run_layer(Graph<Real>& g, const std::vector<Var>& inputs, const TokenMatrix& tokens,
                             LstmWeights<Real>& weights, bool reverse, LstmState<Real>& final_state) const;
  Var run_context_encoder(Graph<Real>& g, const TokenMatrix& tokens, const RunMode& mode) const;
  Var context_attention(Graph<Real>& g, Var query, const ContextView<Real>& context, std::vector<Var>& betas) const;

  ModelParams<Real>* params_;
};

template <typename Real>
template <typename Fn>
void ModelParams<Real>::for_each(Fn&& fn) {
  fn(std::string("source_embedding"), source_embedding);
  fn(std::string("target_embedding"), target_embedding);
  auto lstm = [&fn](const std::string& prefix, std::vector<LstmWeights<Real>>& stack) {
    for (std::size_t l = 0; l < stack.size(); ++l) {
      const std::string base = prefix + "." + std::to_string(l) + ".";
      fn(base + "w_input", stack[l].w_input);
      fn(base + "w_hidden", stack[l].w_hidden);
      fn(base + "bias", stack[l].bias);
    }
  };
  lstm("encoder_forward", encoder_forward);
  lstm("encoder_backward", encoder_backward);
  lstm("decoder", decoder);
  lstm("context_encoder", context_encoder);
  fn(std::string("attention_hidden"), attention_hidden);
  fn(std::string("output_projection"), output_projection);
}

template <typename Real>
template <typename Fn>
void ModelParams<Real>::for_each(Fn&& fn) const {
  const_cast<ModelParams*>(this)->for_each(
      [&fn](const std::string& name, Tensor<Real>& t) { fn(name, static_cast<const Tensor<Real>&>(t)); });
}

template <typename Real>
template <typename To>
ModelParams<To> ModelParams<Real>::cast() const {
  ModelParams<To> out = ModelParams<To>::zeros(config);
  std::vector<const Tensor<Real>*> src;
  for_each([&src](const std::string&, const Tensor<Real>& t) { src.push_back(&t); });
  std::size_t k = 0;
  out.for_each([&](const std::string&, Tensor<To>& t) {
    const auto& s = *src[k++];
    for (std::size_t i = 0; i < t.size(); ++i) t.data[i] = static_cast<To>(s.data[i]);
  });
  return out;
}

extern template struct ModelParams<float>;
extern template struct ModelParams<double>;
extern template class Seq2Seq<float>;
extern template class Seq2Seq<double>;

}  // namespace ctxnmt
