#include "ctxnmt/lstm.hpp"

#include <stdexcept>

namespace ctxnmt {

template <typename Real>
LstmWeights<Real> LstmWeights<Real>::init(int input_size, int hidden_size, double scale, double forget_bias,
                                          Rng& rng) {
  LstmWeights w;
  w.w_input = Tensor<Real>::uniform({4 * hidden_size, input_size}, -scale, scale, rng);
  w.w_hidden = Tensor<Real>::uniform({4 * hidden_size, hidden_size}, -scale, scale, rng);
  w.bias = Tensor<Real>({4 * hidden_size}, true);
  for (int j = 0; j < hidden_size; ++j) w.bias.data[hidden_size + j] = static_cast<Real>(forget_bias);
  return w;
}

template <typename Real>
LstmWeights<Real> LstmWeights<Real>::zeros(int input_size, int hidden_size) {
  LstmWeights w;
  w.w_input = Tensor<Real>({4 * hidden_size, input_size}, true);
  w.w_hidden = Tensor<Real>({4 * hidden_size, hidden_size}, true);
  w.bias = Tensor<Real>({4 * hidden_size}, true);
  return w;
}

template <typename Real>
LstmState<Real> lstm_cell(Graph<Real>& g, Var x, const LstmState<Real>& prev, LstmWeights<Real>& w) {
  if (g.cols(x) != w.input_size() || g.cols(prev.h) != w.hidden_size() || g.cols(prev.c) != w.hidden_size()) {
    throw std::invalid_argument("lstm_cell: input " + shape_string(g.shape(x)) + " / state " +
                                shape_string(g.shape(prev.h)) + " do not match layer (I=" +
                                std::to_string(w.input_size()) + ", H=" + std::to_string(w.hidden_size()) + ")");
  }
  const int hidden = w.hidden_size();
  Var gates = g.add_bias(g.add(g.linear(x, w.w_input), g.linear(prev.h, w.w_hidden)), w.bias);
  Var packed = g.lstm_pointwise(gates, prev.c);
  return {g.slice_cols(packed, 0, hidden), g.slice_cols(packed, hidden, hidden)};
}

template <typename Real>
LstmState<Real> lstm_zero_state(Graph<Real>& g, int batch, int hidden) {
  return {g.zeros({batch, hidden}), g.zeros({batch, hidden})};
}

template struct LstmWeights<float>;
template struct LstmWeights<double>;
template LstmState<float> lstm_cell(Graph<float>&, Var, const LstmState<float>&, LstmWeights<float>&);
template LstmState<double> lstm_cell(Graph<double>&, Var, const LstmState<double>&, LstmWeights<double>&);
template LstmState<float> lstm_zero_state(Graph<float>&, int, int);
template LstmState<double> lstm_zero_state(Graph<double>&, int, int);

}  // namespace ctxnmt
