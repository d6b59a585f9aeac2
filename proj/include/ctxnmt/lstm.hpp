#pragma once

#include <string>
#include <vector>

#include "ctxnmt/graph.hpp"

namespace ctxnmt {

// One LSTM layer. Gate blocks in the 4H dimension are ordered
// (input, forget, output, candidate).
template <typename Real>
struct LstmWeights {
  Tensor<Real> w_input;   // [4H x I]
  Tensor<Real> w_hidden;  // [4H x H]
  Tensor<Real> bias;      // [4H]

  int input_size() const { return w_input.shape[1]; }
  int hidden_size() const { return w_hidden.shape[1]; }

  // uniform(-scale, scale) weights, zero bias except forget_bias on the forget block.
  static LstmWeights init(int input_size, int hidden_size, double scale, double forget_bias, Rng& rng);
  static LstmWeights zeros(int input_size, int hidden_size);

  static long long count(int input_size, int hidden_size) {
    return 4LL * hidden_size * (input_size + hidden_size) + 4LL * hidden_size;
  }
};

template <typename Real>
struct LstmState {
  Var h;
  Var c;
};

template <typename Real>
LstmState<Real> lstm_cell(Graph<Real>& g, Var x, const LstmState<Real>& prev, LstmWeights<Real>& w);

// Zero state of shape [batch x hidden].
template <typename Real>
LstmState<Real> lstm_zero_state(Graph<Real>& g, int batch, int hidden);

extern template struct LstmWeights<float>;
extern template struct LstmWeights<double>;

}  // namespace ctxnmt
