#pragma once

#include "codekc/nn/optim.hpp"

namespace codekc::nn {

// Single-layer LSTM over a [T, d_in] sequence. Gate order in the stacked
// 4H dimension: input, forget, candidate, output.
//   i,f,o = sigmoid, g = tanh;  c_t = f (.) c_{t-1} + i (.) g;  h_t = o (.) tanh(c_t)
struct Lstm {
  Parameter Wx;  // [d_in, 4H]
  Parameter Wh;  // [H, 4H]
  Parameter b;   // [1, 4H]; forget block initialized to 1
  int hidden = 0;
  int input = 0;

  void init(int d_in, int d_h, Rng& rng, const std::string& prefix);
  std::vector<Parameter*> params();
};

struct LstmCache {
  Mat x;      // [T, d_in]
  Mat gates;  // [T, 4H], post-activation
  Mat c;      // [T, H]
  Mat h;      // [T, H]
  Vec h0, c0;
};

// T = x.rows(); T = 0 yields empty h and (hT, cT) = (h0, c0).
LstmCache lstm_forward(const Lstm& lstm, const Mat& x, const Vec& h0, const Vec& c0);

inline Vec lstm_last_h(const LstmCache& cache) {
  return cache.h.rows() == 0 ? cache.h0 : Vec(cache.h.row(cache.h.rows() - 1));
}

// Backpropagation through time. `dh` holds per-step gradients on h_t
// ([T, H]; pass zeros when only the final state feeds the loss), `dhT`/`dcT`
// extra gradients on the final (h, c). Accumulates into the Lstm parameter
// grads and returns dx [T, d_in].
Mat lstm_backward(Lstm& lstm, const LstmCache& cache, const Mat& dh, const Vec& dhT, const Vec& dcT);

}  // namespace codekc::nn
