#include "codekc/nn/optim.hpp"

#include <cmath>

#include "codekc/errors.hpp"

namespace codekc::nn {

void adamax_update(Mat& param, const Mat& grad, AdamaxState& state) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols())
    throw ValidationError("adamax_update: parameter/gradient shape mismatch");
  if (state.m.size() == 0) {
    state.m = Mat::Zero(param.rows(), param.cols());
    state.u = Mat::Zero(param.rows(), param.cols());
  }
  state.t += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.u = (state.beta2 * state.u).cwiseMax(grad.cwiseAbs());
  double rate = state.alpha / (1.0 - std::pow(state.beta1, state.t));
  param.array() -= rate * state.m.array() / (state.u.array() + state.epsilon);
}

void Parameter::init_zero(Eigen::Index rows, Eigen::Index cols) {
  value = Mat::Zero(rows, cols);
  grad = Mat::Zero(rows, cols);
}

void Parameter::init_glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
  value = Mat(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) value(r, c) = (2.0 * rng.uniform() - 1.0) * s;
  if (pad_row_zero && rows > 0) value.row(0).setZero();
  grad = Mat::Zero(rows, cols);
}

void Parameter::zero_grad() { grad.setZero(); }

void Parameter::step(double learning_rate) {
  if (pad_row_zero && grad.rows() > 0) grad.row(0).setZero();
  state.alpha = learning_rate;
  adamax_update(value, grad, state);
  if (pad_row_zero && value.rows() > 0) value.row(0).setZero();
}

std::vector<Mat> snapshot(const std::vector<Parameter*>& params) {
  std::vector<Mat> values;
  values.reserve(params.size());
  for (const Parameter* p : params) values.push_back(p->value);
  return values;
}

void restore(const std::vector<Parameter*>& params, const std::vector<Mat>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

}  // namespace codekc::nn
