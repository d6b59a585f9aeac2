#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "ctxnmt/rng.hpp"
#include "ctxnmt/tensor.hpp"

namespace ctxnmt {

// Handle to a node recorded in a Graph.
struct Var {
  static constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t id = kNone;
  bool valid() const { return id != kNone; }
};

// Tape of executed operations. Nodes are appended in execution order, so the
// reverse of the tape is a valid topological order for backpropagation.
//
// Parameters are not copied into the tape when used through the Tensor&
// overloads (`linear`, `add_bias`, `embedding`); their gradients are
// accumulated straight into Tensor::grad during backward(). A graph with
// gradients disabled records values only.
template <typename Real>
class Graph {
 public:
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  // Leaves.
  Var constant(Shape shape, std::vector<Real> values);
  Var zeros(Shape shape);
  Var parameter(Tensor<Real>& param);

  const Shape& shape(Var v) const { return node(v).shape; }
  std::span<const Real> value(Var v) const { return node(v).value; }
  Real scalar(Var v) const;
  int rows(Var v) const { return node(v).shape[0]; }
  int cols(Var v) const;

  // Elementwise on equal shapes.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, Real factor);
  Var sigmoid(Var a);
  Var tanh(Var a);

  // Reductions to a scalar of shape [1].
  Var sum(Var a);
  Var dot(Var a, Var b);

  // [m x k] . [k x n]
  Var matmul(Var a, Var b);
  // x [B x in] times weight^T, weight stored [out x in].
  Var linear(Var x, Tensor<Real>& weight);
  Var add_bias(Var x, Tensor<Real>& bias);
  // Rows of `table` [V x E] selected by ids -> [ids.size() x E].
  Var embedding(Tensor<Real>& table, std::span<const int> ids);

  Var concat_cols(std::span<const Var> parts);
  Var slice_cols(Var a, int begin, int count);
  // Row b of the result is fresh[b] where keep[b] != 0, else old[b].
  Var select_rows(Var fresh, Var old, std::span<const std::uint8_t> keep);

  // Row-wise softmax; rank-1 input is treated as one row.
  Var softmax_rows(Var a);
  // Softmax restricted to positions with mask != 0. Masked entries are 0; a
  // row with no unmasked position is all zeros.
  Var masked_softmax_rows(Var a, std::span<const std::uint8_t> mask);

  // gates [B x 4H] laid out (input, forget, output, candidate); c_prev [B x H].
  // Returns [B x 2H] holding (h | c).
  Var lstm_pointwise(Var gates, Var c_prev);

  // Inverted dropout. Identity (same Var) when !training or p == 0.
  Var dropout(Var a, double p, bool training, Rng& rng);

  // T tensors of [B x H] -> [B x T x H].
  Var stack_steps(std::span<const Var> steps);
  // memory [B x T x H], query [B x H] -> scores [B x T].
  Var attention_scores(Var memory, Var query);
  // memory [B x T x H], weights [B x T] -> [B x H].
  Var attention_readout(Var memory, Var weights);

  // Sum over rows b with weight[b] != 0 of weight[b] * -log softmax(logits[b])[target[b]].
  Var cross_entropy_sum(Var logits, std::span<const int> targets, std::span<const Real> weights);

  // Reverse-mode sweep from a scalar loss. Gradients are added into the
  // Tensor::grad buffers of every parameter reachable from `loss`.
  void backward(Var loss);

 private:
  struct Node {
    Shape shape;
    std::vector<Real> value;
    std::vector<Real> grad;
    bool needs_grad = false;
    std::function<void()> backprop;
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  Var push(Shape shape, std::vector<Real> value, bool needs_grad);
  bool tracking(Var v) const { return grad_enabled_ && node(v).needs_grad; }
  std::vector<Real>& grad_of(Var v);
  void require_same_shape(Var a, Var b, const char* op) const;

  bool grad_enabled_;
  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace ctxnmt
