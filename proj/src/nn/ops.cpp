#include "codekc/nn/ops.hpp"

#include <cmath>

#include "codekc/errors.hpp"

namespace codekc::nn {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

Mat sigmoid(const Mat& x) {
  return x.unaryExpr([](double v) { return sigmoid(v); });
}

Mat softmax_rows(const Mat& z) {
  Mat out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    double mx = z.row(r).maxCoeff();
    Eigen::ArrayXd e = (z.row(r).array() - mx).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  return out;
}

Mat apply_activation(const Mat& z, Activation act) {
  switch (act) {
    case Activation::None:
      return z;
    case Activation::Sigmoid:
      return sigmoid(z);
    case Activation::Tanh:
      return z.array().tanh().matrix();
    case Activation::Relu:
      return z.cwiseMax(0.0);
    case Activation::Softmax:
      return softmax_rows(z);
  }
  return z;
}

Mat dense_forward(const Mat& x, const Mat& W, const RowVec& b, Activation act) {
  if (x.cols() != W.rows())
    throw ValidationError("dense_forward: input width " + std::to_string(x.cols()) +
                          " does not match weight rows " + std::to_string(W.rows()));
  if (b.size() != W.cols())
    throw ValidationError("dense_forward: bias size does not match weight cols");
  Mat z = (x * W).rowwise() + b;
  return apply_activation(z, act);
}

Mat embedding_forward(const Eigen::VectorXi& ids, const Mat& E) {
  Mat out(ids.size(), E.cols());
  for (Eigen::Index i = 0; i < ids.size(); ++i) {
    int id = ids(i);
    if (id < 0 || id >= E.rows())
      throw ValidationError("embedding_forward: id " + std::to_string(id) + " out of range [0, " +
                            std::to_string(E.rows()) + ")");
    out.row(i) = E.row(id);
  }
  return out;
}

Mat positional_encoding(int length, int dim) {
  if (dim % 2 != 0) throw ValidationError("positional_encoding: dim must be even");
  Mat pe(length, dim);
  for (int p = 0; p < length; ++p) {
    for (int i = 0; i < dim / 2; ++i) {
      double rate = std::pow(10000.0, (2.0 * i) / dim);
      pe(p, 2 * i) = std::sin(p / rate);
      pe(p, 2 * i + 1) = std::cos(p / rate);
    }
  }
  return pe;
}

Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ValidationError("dropout rate must lie in [0, 1)");
  Mat mask(rows, cols);
  double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) mask(r, c) = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

Mat dropout(const Mat& x, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ValidationError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  return x.cwiseProduct(dropout_mask(x.rows(), x.cols(), rate, rng));
}

double bce_mean(const Vec& predictions, const Vec& labels) {
  if (predictions.size() != labels.size())
    throw ValidationError("bce_mean: prediction/label size mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < predictions.size(); ++i) {
    double p = std::min(std::max(predictions(i), 1e-12), 1.0 - 1e-12);
    total += -(labels(i) * std::log(p) + (1.0 - labels(i)) * std::log(1.0 - p));
  }
  return predictions.size() == 0 ? 0.0 : total / static_cast<double>(predictions.size());
}

double binary_entropy(double a) {
  double h = 0.0;
  if (a > 0.0) h -= a * std::log(a);
  if (a < 1.0) h -= (1.0 - a) * std::log(1.0 - a);
  return h;
}

}  // namespace codekc::nn
