#include "ctxnmt/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace ctxnmt {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::SeparatedSource: return "separated-source";
    case Variant::SeparatedTarget: return "separated-target";
    case Variant::SharedSource: return "shared-source";
    case Variant::SharedTarget: return "shared-target";
    case Variant::SharedMix: return "shared-mix";
  }
  return "unknown";
}

Variant parse_variant(std::string_view text) {
  for (Variant v : kAllVariants)
    if (to_string(v) == text) return v;
  throw std::invalid_argument("unknown variant '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  if (embed_dim < 1) throw std::invalid_argument("embed_dim must be positive");
  if (hidden_dim < 2 || hidden_dim % 2 != 0) throw std::invalid_argument("hidden_dim must be positive and even");
  if (source_vocab < 5 || target_vocab < 5) throw std::invalid_argument("vocabularies must hold at least one non-reserved token");
  if (layers < 1) throw std::invalid_argument("layers must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must satisfy 0 <= p < 1");
}

long long param_count(Variant variant, const ModelConfig& c) {
  const long long E = c.embed_dim, H = c.hidden_dim;
  long long total = (c.source_vocab + c.target_vocab) * E;
  for (int l = 0; l < c.layers; ++l) {
    const int input = l == 0 ? c.embed_dim : c.hidden_dim;
    total += 2 * LstmWeights<float>::count(input, c.hidden_dim / 2);
    total += LstmWeights<float>::count(input, c.hidden_dim);
    if (is_separated(variant)) total += LstmWeights<float>::count(input, c.hidden_dim);
  }
  total += H * (has_context(variant) ? 3 * H : 2 * H);
  total += c.target_vocab * H;
  return total;
}

template <typename Real>
ModelParams<Real> ModelParams<Real>::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  ModelParams p;
  p.config = config;
  const int E = config.embed_dim, H = config.hidden_dim;
  p.source_embedding = Tensor<Real>::uniform({config.source_vocab, E}, -kInitScale, kInitScale, rng);
  p.target_embedding = Tensor<Real>::uniform({config.target_vocab, E}, -kInitScale, kInitScale, rng);
  for (int l = 0; l < config.layers; ++l) {
    const int input = l == 0 ? E : H;
    p.encoder_forward.push_back(LstmWeights<Real>::init(input, H / 2, kInitScale, kForgetBias, rng));
    p.encoder_backward.push_back(LstmWeights<Real>::init(input, H / 2, kInitScale, kForgetBias, rng));
  }
  for (int l = 0; l < config.layers; ++l)
    p.decoder.push_back(LstmWeights<Real>::init(l == 0 ? E : H, H, kInitScale, kForgetBias, rng));
  if (is_separated(config.variant)) {
    for (int l = 0; l < config.layers; ++l)
      p.context_encoder.push_back(LstmWeights<Real>::init(l == 0 ? E : H, H, kInitScale, kForgetBias, rng));
  }
  p.attention_hidden =
      Tensor<Real>::uniform({H, has_context(config.variant) ? 3 * H : 2 * H}, -kInitScale, kInitScale, rng);
  p.output_projection = Tensor<Real>::uniform({config.target_vocab, H}, -kInitScale, kInitScale, rng);
  return p;
}

template <typename Real>
ModelParams<Real> ModelParams<Real>::zeros(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.config = config;
  const int E = config.embed_dim, H = config.hidden_dim;
  p.source_embedding = Tensor<Real>({config.source_vocab, E}, true);
  p.target_embedding = Tensor<Real>({config.target_vocab, E}, true);
  for (int l = 0; l < config.layers; ++l) {
    const int input = l == 0 ? E : H;
    p.encoder_forward.push_back(LstmWeights<Real>::zeros(input, H / 2));
    p.encoder_backward.push_back(LstmWeights<Real>::zeros(input, H / 2));
  }
  for (int l = 0; l < config.layers; ++l) p.decoder.push_back(LstmWeights<Real>::zeros(l == 0 ? E : H, H));
  if (is_separated(config.variant)) {
    for (int l = 0; l < config.layers; ++l) p.context_encoder.push_back(LstmWeights<Real>::zeros(l == 0 ? E : H, H));
  }
  p.attention_hidden = Tensor<Real>({H, has_context(config.variant) ? 3 * H : 2 * H}, true);
  p.output_projection = Tensor<Real>({config.target_vocab, H}, true);
  return p;
}

template <typename Real>
std::vector<Tensor<Real>*> ModelParams<Real>::tensors() {
  std::vector<Tensor<Real>*> out;
  for_each([&out](const std::string&, Tensor<Real>& t) { out.push_back(&t); });
  return out;
}

template <typename Real>
long long ModelParams<Real>::count() const {
  long long n = 0;
  for_each([&n](const std::string&, const Tensor<Real>& t) { n += static_cast<long long>(t.size()); });
  return n;
}

template <typename Real>
void ModelParams<Real>::zero_grad() {
  for_each([](const std::string&, Tensor<Real>& t) { t.zero_grad(); });
}

template <typename Real>
StateMemory<Real> StateMemory<Real>::capture(const Graph<Real>& g, Var states, std::span<const std::uint8_t> mask) {
  const Shape& s = g.shape(states);
  if (s.size() != 3) throw std::invalid_argument("StateMemory::capture: expected [B x T x H] states");
  StateMemory m;
  m.batch = s[0];
  m.length = s[1];
  m.dim = s[2];
  if (mask.size() != static_cast<std::size_t>(m.batch) * m.length) {
    throw std::invalid_argument("StateMemory::capture: mask length mismatch");
  }
  auto v = g.value(states);
  m.values.assign(v.begin(), v.end());
  m.mask.assign(mask.begin(), mask.end());
  return m;
}

template <typename Real>
StateMemory<Real> StateMemory<Real>::repeat_rows(int rows) const {
  if (empty()) return *this;
  if (batch != 1) throw std::invalid_argument("StateMemory::repeat_rows: batch must be 1");
  StateMemory m;
  m.batch = rows;
  m.length = length;
  m.dim = dim;
  for (int r = 0; r < rows; ++r) {
    m.values.insert(m.values.end(), values.begin(), values.end());
    m.mask.insert(m.mask.end(), mask.begin(), mask.end());
  }
  return m;
}

template <typename Real>
ContextCache<Real> make_context_cache(Variant variant, const TokenMatrix* prev_source, const TokenMatrix* prev_target,
                                      const StateMemory<Real>* prev_encoder, const StateMemory<Real>* prev_decoder) {
  ContextCache<Real> cache;
  const bool first_sentence = !prev_source && !prev_target && !prev_encoder && !prev_decoder;
  if (first_sentence || variant == Variant::Baseline) return cache;
  auto missing = [variant](const char* what) {
    return std::invalid_argument(std::string(to_string(variant)) + " context needs the previous sentence's " + what);
  };
  switch (variant) {
    case Variant::SeparatedSource:
      if (!prev_source) throw missing("source tokens");
      cache.tokens = *prev_source;
      break;
    case Variant::SeparatedTarget:
      if (!prev_target) throw missing("target tokens");
      cache.tokens = *prev_target;
      break;
    case Variant::SharedSource:
      if (!prev_encoder) throw missing("encoder states");
      cache.source = *prev_encoder;
      break;
    case Variant::SharedTarget:
      if (!prev_decoder) throw missing("decoder states");
      cache.target = *prev_decoder;
      break;
    case Variant::SharedMix:
      if (!prev_encoder) throw missing("encoder states");
      if (!prev_decoder) throw missing("decoder states");
      cache.source = *prev_encoder;
      cache.target = *prev_decoder;
      break;
    case Variant::Baseline:
      break;
  }
  return cache;
}

template <typename Real>
Seq2Seq<Real>::Seq2Seq(ModelParams<Real>& params) : params_(&params) {
  params.config.validate();
}

template <typename Real>
std::vector<Var> Seq2Seq<Real>::run_layer(Graph<Real>& g, const std::vector<Var>& inputs, const TokenMatrix& tokens,
                                          LstmWeights<Real>& weights, bool reverse,
                                          LstmState<Real>& final_state) const {
  const int length = static_cast<int>(inputs.size());
  LstmState<Real> state = lstm_zero_state(g, tokens.rows, weights.hidden_size());
  std::vector<Var> outputs(length);
  for (int k = 0; k < length; ++k) {
    const int t = reverse ? length - 1 - k : k;
    LstmState<Real> fresh = lstm_cell(g, inputs[t], state, weights);
    const auto keep = tokens.column_mask(t);
    if (std::all_of(keep.begin(), keep.end(), [](std::uint8_t m) { return m != 0; })) {
      state = fresh;
    } else {
      // padded rows carry their previous state through
      state = {g.select_rows(fresh.h, state.h, keep), g.select_rows(fresh.c, state.c, keep)};
    }
    outputs[t] = state.h;
  }
  final_state = state;
  return outputs;
}

template <typename Real>
EncoderStates<Real> Seq2Seq<Real>::encode(Graph<Real>& g, const TokenMatrix& source, const RunMode& mode) const {
  if (source.empty()) throw std::invalid_argument("encode: empty source matrix");
  if (mode.training && !mode.rng) throw std::invalid_argument("encode: training mode needs an Rng");
  auto& p = *params_;
  const double drop = p.config.dropout;
  Rng dummy(0);
  Rng& rng = mode.rng ? *mode.rng : dummy;

  std::vector<Var> inputs(source.cols);
  for (int t = 0; t < source.cols; ++t) {
    const auto ids = source.column(t);
    inputs[t] = g.dropout(g.embedding(p.source_embedding, ids), drop, mode.training, rng);
  }
  EncoderStates<Real> enc;
  enc.batch = source.rows;
  enc.length = source.cols;
  enc.mask = source.mask;
  std::vector<Var> outputs;
  for (int l = 0; l < p.config.layers; ++l) {
    LstmState<Real> fwd_final, bwd_final;
    auto fwd = run_layer(g, inputs, source, p.encoder_forward[l], false, fwd_final);
    auto bwd = run_layer(g, inputs, source, p.encoder_backward[l], true, bwd_final);
    const std::array<Var, 2> hs{fwd_final.h, bwd_final.h};
    const std::array<Var, 2> cs{fwd_final.c, bwd_final.c};
    enc.final.push_back({g.concat_cols(hs), g.concat_cols(cs)});
    outputs.assign(source.cols, Var{});
    for (int t = 0; t < source.cols; ++t) {
      const std::array<Var, 2> both{fwd[t], bwd[t]};
      outputs[t] = g.concat_cols(both);
    }
    if (l + 1 < p.config.layers) {
      for (int t = 0; t < source.cols; ++t) inputs[t] = g.dropout(outputs[t], drop, mode.training, rng);
    }
  }
  enc.states = g.stack_steps(outputs);
  return enc;
}

template <typename Real>
Var Seq2Seq<Real>::run_context_encoder(Graph<Real>& g, const TokenMatrix& tokens, const RunMode& mode) const {
  auto& p = *params_;
  if (p.context_encoder.empty()) throw std::logic_error("context encoder weights are missing");
  const double drop = p.config.dropout;
  Rng dummy(0);
  Rng& rng = mode.rng ? *mode.rng : dummy;
  Tensor<Real>& table = variant() == Variant::SeparatedSource ? p.source_embedding : p.target_embedding;
  std::vector<Var> inputs(tokens.cols);
  for (int t = 0; t < tokens.cols; ++t) {
    const auto ids = tokens.column(t);
    inputs[t] = g.dropout(g.embedding(table, ids), drop, mode.training, rng);
  }
  std::vector<Var> outputs;
  for (std::size_t l = 0; l < p.context_encoder.size(); ++l) {
    LstmState<Real> final_state;
    outputs = run_layer(g, inputs, tokens, p.context_encoder[l], false, final_state);
    if (l + 1 < p.context_encoder.size()) {
      for (int t = 0; t < tokens.cols; ++t) inputs[t] = g.dropout(outputs[t], drop, mode.training, rng);
    }
  }
  return g.stack_steps(outputs);
}

template <typename Real>
ContextView<Real> Seq2Seq<Real>::context_view(Graph<Real>& g, const ContextCache<Real>& cache,
                                              const RunMode& mode) const {
  ContextView<Real> view;
  if (!has_context(variant())) return view;
  auto add_memory = [&](const StateMemory<Real>& m) {
    if (m.empty()) return;
    view.memories.push_back(g.constant({m.batch, m.length, m.dim}, m.values));
    view.masks.push_back(m.mask);
  };
  if (is_separated(variant())) {
    if (!cache.tokens.empty()) {
      view.memories.push_back(run_context_encoder(g, cache.tokens, mode));
      view.masks.push_back(cache.tokens.mask);
    }
    return view;
  }
  if (reads_source_context(variant())) add_memory(cache.source);
  if (reads_target_context(variant())) add_memory(cache.target);
  return view;
}

template <typename Real>
std::vector<LstmState<Real>> Seq2Seq<Real>::initial_carry(Graph<Real>&, const EncoderStates<Real>& enc) const {
  return enc.final;
}

template <typename Real>
Var Seq2Seq<Real>::context_attention(Graph<Real>& g, Var query, const ContextView<Real>& context,
                                     std::vector<Var>& betas) const {
  Var total;
  for (std::size_t k = 0; k < context.memories.size(); ++k) {
    Var scores = g.attention_scores(context.memories[k], query);
    Var beta = g.masked_softmax_rows(scores, context.masks[k]);
    betas.push_back(beta);
    Var part = g.attention_readout(context.memories[k], beta);
    total = total.valid() ? g.add(total, part) : part;
  }
  if (!total.valid()) total = g.zeros({g.rows(query), g.cols(query)});
  return total;
}

template <typename Real>
StepResult<Real> Seq2Seq<Real>::decode_step(Graph<Real>& g, std::span<const int> prev_tokens,
                                            const std::vector<LstmState<Real>>& carry, const EncoderStates<Real>& enc,
                                            const ContextView<Real>& context, const RunMode& mode) const {
  auto& p = *params_;
  if (static_cast<int>(prev_tokens.size()) != enc.batch) throw std::invalid_argument("decode_step: batch mismatch");
  if (mode.training && !mode.rng) throw std::invalid_argument("decode_step: training mode needs an Rng");
  const double drop = p.config.dropout;
  Rng dummy(0);
  Rng& rng = mode.rng ? *mode.rng : dummy;

  StepResult<Real> out;
  Var x = g.dropout(g.embedding(p.target_embedding, prev_tokens), drop, mode.training, rng);
  for (std::size_t l = 0; l < p.decoder.size(); ++l) {
    if (l > 0) x = g.dropout(x, drop, mode.training, rng);
    LstmState<Real> next = lstm_cell(g, x, carry[l], p.decoder[l]);
    out.carry.push_back(next);
    x = next.h;
  }
  out.top_state = x;

  Var scores = g.attention_scores(enc.states, out.top_state);
  out.alpha = g.masked_softmax_rows(scores, enc.mask);
  Var attended = g.attention_readout(enc.states, out.alpha);

  std::vector<Var> parts{out.top_state, attended};
  if (has_context(variant())) {
    out.context = context_attention(g, out.top_state, context, out.betas);
    parts.push_back(out.context);
  }
  out.attn_hidden = g.tanh(g.linear(g.concat_cols(parts), p.attention_hidden));
  out.logits = g.linear(out.attn_hidden, p.output_projection);
  return out;
}

template <typename Real>
ForwardResult<Real> Seq2Seq<Real>::forward_loss(Graph<Real>& g, const PositionBatch& batch,
                                                const ContextCache<Real>& cache, const RunMode& mode) const {
  ForwardResult<Real> res;
  res.tokens = batch.target_tokens();
  if (res.tokens == 0) throw std::invalid_argument("forward_loss: batch position has no target tokens");
  res.encoder = encode(g, batch.source, mode);
  ContextView<Real> view = context_view(g, cache, mode);
  auto carry = initial_carry(g, res.encoder);
  const TokenMatrix& in = batch.target_input;
  const TokenMatrix& gold = batch.target_output;
  std::vector<Var> tops;
  Var total;
  for (int n = 0; n < in.cols; ++n) {
    const auto prev = in.column(n);
    StepResult<Real> step = decode_step(g, prev, carry, res.encoder, view, mode);
    carry = step.carry;
    tops.push_back(step.top_state);
    const auto targets = gold.column(n);
    const auto m = gold.column_mask(n);
    std::vector<Real> weights(m.begin(), m.end());
    Var nll = g.cross_entropy_sum(step.logits, targets, weights);
    total = total.valid() ? g.add(total, nll) : nll;
  }
  res.loss_sum = total;
  res.loss = g.scale(total, Real(1) / static_cast<Real>(res.tokens));
  // one state per target token y_t: the step whose input is y_t, so the BOS
  // step is left out
  if (in.cols > 1) {
    res.decoder_states = g.stack_steps(std::span<const Var>(tops).subspan(1));
    for (int b = 0; b < in.rows; ++b)
      for (int n = 1; n < in.cols; ++n) res.decoder_mask.push_back(in.on(b, n) ? 1 : 0);
  }
  return res;
}

template <typename Real>
ContextCache<Real> Seq2Seq<Real>::next_cache(const Graph<Real>& g, const PositionBatch& batch,
                                             const ForwardResult<Real>& result) const {
  const Variant v = variant();
  StateMemory<Real> enc_mem, dec_mem;
  if (v == Variant::SharedSource || v == Variant::SharedMix) {
    enc_mem = StateMemory<Real>::capture(g, result.encoder.states, result.encoder.mask);
  }
  if ((v == Variant::SharedTarget || v == Variant::SharedMix) && result.decoder_states.valid()) {
    dec_mem = StateMemory<Real>::capture(g, result.decoder_states, result.decoder_mask);
  }
  return make_context_cache<Real>(v, &batch.source, &batch.target_output, &enc_mem, &dec_mem);
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template struct StateMemory<float>;
template struct StateMemory<double>;
template class Seq2Seq<float>;
template class Seq2Seq<double>;
template ContextCache<float> make_context_cache(Variant, const TokenMatrix*, const TokenMatrix*,
                                                const StateMemory<float>*, const StateMemory<float>*);
template ContextCache<double> make_context_cache(Variant, const TokenMatrix*, const TokenMatrix*,
                                                 const StateMemory<double>*, const StateMemory<double>*);

}  // namespace ctxnmt
