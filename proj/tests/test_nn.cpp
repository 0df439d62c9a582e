#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "codekc/errors.hpp"
#include "codekc/nn/checkpoint.hpp"
#include "codekc/nn/gradcheck.hpp"
#include "codekc/nn/lstm.hpp"
#include "codekc/nn/ops.hpp"
#include "codekc/nn/optim.hpp"
#include "doctest.h"

using namespace codekc;
using namespace codekc::nn;

TEST_CASE("dense_forward basics") {
  Mat x(2, 3);
  x << 1, 2, 3, 4, 5, 6;

  // Zero weights + sigmoid: everything is 0.5.
  Mat w0 = Mat::Zero(3, 4);
  RowVec b0 = RowVec::Zero(4);
  Mat y = dense_forward(x, w0, b0, Activation::Sigmoid);
  for (Eigen::Index i = 0; i < y.size(); ++i) CHECK(y(i) == doctest::Approx(0.5));

  // Identity weights, no activation: y = x.
  Mat wi = Mat::Identity(3, 3);
  RowVec bi = RowVec::Zero(3);
  CHECK((dense_forward(x, wi, bi, Activation::None) - x).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(dense_forward(x, Mat::Zero(2, 2), RowVec::Zero(2), Activation::None),
                  ValidationError);
}

TEST_CASE("softmax rows are probability vectors") {
  Rng rng(3);
  Mat z(5, 7);
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal() * 10;
  Mat p = dense_forward(z, Mat::Identity(7, 7), RowVec::Zero(7), Activation::Softmax);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    CHECK(p.row(r).minCoeff() >= 0.0);
    CHECK(p.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("embedding_forward looks up rows and pins padding") {
  Rng rng(4);
  Parameter e;
  e.name = "emb";
  e.pad_row_zero = true;
  e.init_glorot(5, 3, rng);
  Eigen::VectorXi ids(3);
  ids << 0, 2, 2;
  Mat rows = embedding_forward(ids, e.value);
  CHECK(rows.row(0).cwiseAbs().maxCoeff() == 0.0);  // padding row is zero
  CHECK((rows.row(1) - rows.row(2)).cwiseAbs().maxCoeff() == 0.0);
  Eigen::VectorXi bad(1);
  bad << 7;
  CHECK_THROWS_AS(embedding_forward(bad, e.value), ValidationError);
}

TEST_CASE("embedding gradient equals id counts for a sum loss") {
  // d/dE[k] of sum(embedding rows) concentrates the count of id k per column.
  Rng rng(5);
  Parameter e;
  e.init_glorot(4, 2, rng);
  Eigen::VectorXi ids(5);
  ids << 1, 2, 1, 3, 1;
  e.zero_grad();
  for (Eigen::Index i = 0; i < ids.size(); ++i) e.grad.row(ids(i)) += RowVec::Ones(2);
  auto loss = [&] { return embedding_forward(ids, e.value).sum(); };
  Parameter* params[] = {&e};
  Rng check_rng(6);
  double err = grad_check(loss, params, check_rng, 8);
  CHECK(err < 1e-8);
  CHECK(e.grad(1, 0) == doctest::Approx(3.0));  // id 1 appears three times
}

TEST_CASE("positional encoding values and range") {
  Mat pe = positional_encoding(6, 8);
  CHECK(pe(0, 0) == 0.0);  // sin 0
  CHECK(pe(0, 1) == 1.0);  // cos 0
  CHECK(pe.maxCoeff() <= 1.0);
  CHECK(pe.minCoeff() >= -1.0);
  CHECK_THROWS_AS(positional_encoding(4, 3), ValidationError);
}

TEST_CASE("dropout identity cases and expectation") {
  Rng rng(7);
  Mat x = Mat::Constant(10, 10, 2.0);
  CHECK((dropout(x, 0.3, false, rng) - x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((dropout(x, 0.0, true, rng) - x).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(dropout(x, 1.0, true, rng), ValidationError);

  // Monte-Carlo: inverted dropout preserves the mean within 1%.
  double total = 0.0;
  const int trials = 2000;  // 2000 * 100 = 2e5 coefficients
  for (int t = 0; t < trials; ++t) total += dropout(x, 0.2, true, rng).mean();
  CHECK(total / trials == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("adamax single-step matches the update formula") {
  Mat param = Mat::Zero(1, 1);
  Mat grad = Mat::Constant(1, 1, 1.0);
  AdamaxState state;
  adamax_update(param, grad, state);
  // m = 0.1, u = 1, step = (0.001/0.1) * 0.1 / (1 + 1e-8)
  double m = (1.0 - 0.9) * 1.0;
  double expected = -(0.001 / (1.0 - std::pow(0.9, 1))) * (m / (1.0 + 1e-8));
  CHECK(param(0, 0) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(param(0, 0) == doctest::Approx(-0.001).epsilon(1e-7));
  CHECK(state.t == 1);
}

TEST_CASE("adamax with zero gradients leaves parameters unchanged") {
  Mat param = Mat::Constant(2, 2, 3.0);
  Mat zero = Mat::Zero(2, 2);
  AdamaxState state;
  for (int i = 0; i < 5; ++i) adamax_update(param, zero, state);
  CHECK((param.array() == 3.0).all());
}

TEST_CASE("adamax minimizes a scalar quadratic") {
  // f(w) = w^2, df/dw = 2w, starting at w0 = 1.
  Mat w = Mat::Constant(1, 1, 1.0);
  AdamaxState state;
  double prev = std::abs(w(0, 0));
  for (int step = 0; step < 200; ++step) {
    Mat g = 2.0 * w;
    adamax_update(w, g, state);
    CHECK(std::abs(w(0, 0)) <= prev + 1e-15);
    prev = std::abs(w(0, 0));
  }
  CHECK(std::abs(w(0, 0)) < 0.9);
}

TEST_CASE("padding row stays zero through updates") {
  Rng rng(8);
  Parameter e;
  e.pad_row_zero = true;
  e.init_glorot(4, 3, rng);
  for (int i = 0; i < 10; ++i) {
    e.zero_grad();
    e.grad.setConstant(0.5);  // even a (bogus) gradient on row 0 must not move it
    e.step(0.01);
  }
  CHECK(e.value.row(0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lstm zero weights zero inputs give zero outputs") {
  Lstm lstm;
  Rng rng(9);
  lstm.init(3, 4, rng, "t");
  lstm.Wx.value.setZero();
  lstm.Wh.value.setZero();
  lstm.b.value.setZero();
  Mat x = Mat::Zero(5, 3);
  LstmCache cache = lstm_forward(lstm, x, Vec::Zero(4), Vec::Zero(4));
  CHECK(cache.h.cwiseAbs().maxCoeff() == 0.0);  // o=0.5, tanh(c)=0
}

TEST_CASE("lstm empty sequence returns the initial state") {
  Lstm lstm;
  Rng rng(10);
  lstm.init(3, 4, rng, "t");
  Vec h0 = Vec::Constant(4, 0.25), c0 = Vec::Constant(4, -0.5);
  LstmCache cache = lstm_forward(lstm, Mat(0, 3), h0, c0);
  CHECK(cache.h.rows() == 0);
  CHECK((lstm_last_h(cache) - h0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lstm forget bias initialized to one") {
  Lstm lstm;
  Rng rng(11);
  lstm.init(2, 3, rng, "t");
  CHECK((lstm.b.value.block(0, 3, 1, 3).array() == 1.0).all());
}

TEST_CASE("lstm analytic gradient matches central differences on a 3-step toy") {
  Lstm lstm;
  Rng rng(12);
  lstm.init(3, 4, rng, "toy");
  Mat x(3, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal() * 0.5;
  Vec h0 = Vec::Zero(4), c0 = Vec::Zero(4);
  RowVec target = RowVec::Constant(4, 0.3);

  auto loss = [&] {
    LstmCache cache = lstm_forward(lstm, x, h0, c0);
    // Sum of squared errors over all step outputs plus the final cell.
    double l = 0.0;
    for (Eigen::Index t = 0; t < cache.h.rows(); ++t)
      l += (cache.h.row(t) - target).squaredNorm();
    l += cache.c.row(cache.c.rows() - 1).squaredNorm();
    return l;
  };

  for (Parameter* p : lstm.params()) p->zero_grad();
  LstmCache cache = lstm_forward(lstm, x, h0, c0);
  Mat dh(3, 4);
  for (Eigen::Index t = 0; t < 3; ++t) dh.row(t) = 2.0 * (cache.h.row(t) - target);
  Vec dcT = 2.0 * cache.c.row(2).transpose();
  lstm_backward(lstm, cache, dh, Vec::Zero(4), dcT);

  auto params = lstm.params();
  Rng check_rng(13);
  double err = grad_check(loss, params, check_rng, 20);
  CHECK(err < 1e-6);
}

TEST_CASE("lstm backward propagates input gradients") {
  Lstm lstm;
  Rng rng(14);
  lstm.init(2, 3, rng, "t");
  Mat x(4, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  Vec zero = Vec::Zero(3);
  LstmCache cache = lstm_forward(lstm, x, zero, zero);

  auto loss = [&] {
    LstmCache c = lstm_forward(lstm, x, zero, zero);
    return lstm_last_h(c).sum();
  };
  for (Parameter* p : lstm.params()) p->zero_grad();
  Mat dx = lstm_backward(lstm, cache, Mat::Zero(4, 3), Vec::Ones(3), zero);

  // Central differences on x itself.
  double h = 1e-6;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      double saved = x(r, c);
      x(r, c) = saved + h;
      double up = loss();
      x(r, c) = saved - h;
      double down = loss();
      x(r, c) = saved;
      CHECK(dx(r, c) == doctest::Approx((up - down) / (2 * h)).epsilon(1e-4));
    }
  }
}

TEST_CASE("grad_check flags an intentionally wrong gradient") {
  Parameter p;
  p.init_zero(2, 2);
  p.value.setConstant(1.0);
  p.zero_grad();
  p.grad.setConstant(123.0);  // wrong on purpose; true gradient is 1
  auto loss = [&] { return p.value.sum(); };
  Parameter* params[] = {&p};
  Rng rng(15);
  CHECK(grad_check(loss, params, rng, 4) > 0.9);
}

TEST_CASE("grad_check on a linear loss is exact") {
  Rng rng(16);
  Parameter w;
  w.init_glorot(3, 3, rng);
  Mat x(3, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  auto loss = [&] { return (w.value.cwiseProduct(x)).sum(); };
  w.grad = x;
  Parameter* params[] = {&w};
  double err = grad_check(loss, params, rng, 9);
  CHECK(err < 1e-10);
}

TEST_CASE("checkpoint round-trips named arrays") {
  Rng rng(17);
  std::map<std::string, Mat> arrays;
  Mat a(2, 3), b(4, 1);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.normal();
  for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.normal();
  arrays["layer.w"] = a;
  arrays["layer.b"] = b;
  save_checkpoint("t_ckpt.bin", arrays);
  auto loaded = load_checkpoint("t_ckpt.bin");
  REQUIRE(loaded.size() == 2);
  CHECK((loaded.at("layer.w") - a).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.at("layer.b") - b).cwiseAbs().maxCoeff() == 0.0);
  std::remove("t_ckpt.bin");
}

TEST_CASE("checkpoint header is length-prefixed JSON") {
  std::map<std::string, Mat> arrays;
  arrays["x"] = Mat::Constant(1, 1, 2.5);
  save_checkpoint("t_ckpt2.bin", arrays);
  std::ifstream in("t_ckpt2.bin", std::ios::binary);
  unsigned char len_bytes[8];
  in.read(reinterpret_cast<char*>(len_bytes), 8);
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(len_bytes[i]) << (8 * i);
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  CHECK(header.find("\"x\"") != std::string::npos);
  CHECK(header.find("offset") != std::string::npos);
  std::remove("t_ckpt2.bin");
}

TEST_CASE("rng streams are reproducible and forked streams differ") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    double x = a.uniform(), y = b.uniform(), z = c.uniform();
    all_equal = all_equal && x == y;
    any_diff = any_diff || x != z;
  }
  CHECK(all_equal);
  CHECK(any_diff);
  Rng f1 = a.fork("alpha"), f2 = a.fork("beta");
  CHECK(f1.uniform() != f2.uniform());
}

TEST_CASE("rng normal moments") {
  Rng rng(2718);
  double sum = 0, sum2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sum2 += x * x;
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(0.02));
  CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.02));
}
