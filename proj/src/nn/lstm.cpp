#include "codekc/nn/lstm.hpp"

#include <cmath>

#include "codekc/errors.hpp"

namespace codekc::nn {

void Lstm::init(int d_in, int d_h, Rng& rng, const std::string& prefix) {
  input = d_in;
  hidden = d_h;
  Wx.name = prefix + ".Wx";
  Wh.name = prefix + ".Wh";
  b.name = prefix + ".b";
  Wx.init_glorot(d_in, 4 * d_h, rng);
  Wh.init_glorot(d_h, 4 * d_h, rng);
  b.init_zero(1, 4 * d_h);
  // Forget-gate bias starts at 1 so early training does not wipe the cell.
  b.value.block(0, d_h, 1, d_h).setOnes();
}

std::vector<Parameter*> Lstm::params() { return {&Wx, &Wh, &b}; }

LstmCache lstm_forward(const Lstm& lstm, const Mat& x, const Vec& h0, const Vec& c0) {
  const int H = lstm.hidden;
  if (x.cols() != lstm.input && x.rows() > 0)
    throw ValidationError("lstm_forward: input width mismatch");
  if (h0.size() != H || c0.size() != H)
    throw ValidationError("lstm_forward: state size mismatch");

  const Eigen::Index T = x.rows();
  LstmCache cache;
  cache.x = x;
  cache.h0 = h0;
  cache.c0 = c0;
  cache.gates.resize(T, 4 * H);
  cache.c.resize(T, H);
  cache.h.resize(T, H);

  RowVec h_prev = h0.transpose();
  RowVec c_prev = c0.transpose();
  for (Eigen::Index t = 0; t < T; ++t) {
    RowVec a = x.row(t) * lstm.Wx.value + h_prev * lstm.Wh.value + lstm.b.value;
    for (int j = 0; j < H; ++j) {
      double i = sigmoid(a(j));
      double f = sigmoid(a(H + j));
      double g = std::tanh(a(2 * H + j));
      double o = sigmoid(a(3 * H + j));
      double c = f * c_prev(j) + i * g;
      cache.gates(t, j) = i;
      cache.gates(t, H + j) = f;
      cache.gates(t, 2 * H + j) = g;
      cache.gates(t, 3 * H + j) = o;
      cache.c(t, j) = c;
      cache.h(t, j) = o * std::tanh(c);
    }
    h_prev = cache.h.row(t);
    c_prev = cache.c.row(t);
  }
  return cache;
}

Mat lstm_backward(Lstm& lstm, const LstmCache& cache, const Mat& dh, const Vec& dhT, const Vec& dcT) {
  const int H = lstm.hidden;
  const Eigen::Index T = cache.x.rows();
  if (dh.rows() != T) throw ValidationError("lstm_backward: dh length mismatch");

  Mat dx = Mat::Zero(T, lstm.input);
  RowVec dh_carry = dhT.transpose();
  RowVec dc_carry = dcT.transpose();

  for (Eigen::Index t = T - 1; t >= 0; --t) {
    RowVec dh_total = dh.row(t) + dh_carry;
    RowVec da(4 * H);
    RowVec dc(H);
    RowVec h_prev = t == 0 ? RowVec(cache.h0.transpose()) : RowVec(cache.h.row(t - 1));
    RowVec c_prev = t == 0 ? RowVec(cache.c0.transpose()) : RowVec(cache.c.row(t - 1));
    for (int j = 0; j < H; ++j) {
      double i = cache.gates(t, j);
      double f = cache.gates(t, H + j);
      double g = cache.gates(t, 2 * H + j);
      double o = cache.gates(t, 3 * H + j);
      double tanh_c = std::tanh(cache.c(t, j));
      double d_o = dh_total(j) * tanh_c;
      double d_c = dh_total(j) * o * (1.0 - tanh_c * tanh_c) + dc_carry(j);
      double d_i = d_c * g;
      double d_f = d_c * c_prev(j);
      double d_g = d_c * i;
      da(j) = d_i * i * (1.0 - i);
      da(H + j) = d_f * f * (1.0 - f);
      da(2 * H + j) = d_g * (1.0 - g * g);
      da(3 * H + j) = d_o * o * (1.0 - o);
      dc(j) = d_c * f;
    }
    lstm.Wx.grad += cache.x.row(t).transpose() * da;
    lstm.Wh.grad += h_prev.transpose() * da;
    lstm.b.grad += da;
    dx.row(t) = da * lstm.Wx.value.transpose();
    dh_carry = da * lstm.Wh.value.transpose();
    dc_carry = dc;
  }
  return dx;
}

}  // namespace codekc::nn
