#pragma once

#include <string>
#include <vector>

#include "codekc/nn/ops.hpp"

namespace codekc::nn {

// Adamax: m = b1 m + (1-b1) g;  u = max(b2 u, |g|);
//         param -= (alpha / (1 - b1^t)) * m / (u + eps).
struct AdamaxState {
  int t = 0;
  Mat m;  // first moment
  Mat u;  // exponentially weighted infinity norm, entrywise >= 0
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void adamax_update(Mat& param, const Mat& grad, AdamaxState& state);

// A named trainable array with its gradient and optimizer state.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  AdamaxState state;
  bool pad_row_zero = false;  // embeddings: row 0 stays exactly zero

  void init_zero(Eigen::Index rows, Eigen::Index cols);
  // Uniform in [-s, s], s = sqrt(6 / (fan_in + fan_out)).
  void init_glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng);
  void zero_grad();
  void step(double learning_rate);
};

// Snapshot/restore for early stopping.
std::vector<Mat> snapshot(const std::vector<Parameter*>& params);
void restore(const std::vector<Parameter*>& params, const std::vector<Mat>& values);

}  // namespace codekc::nn
