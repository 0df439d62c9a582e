#pragma once

#include <Eigen/Dense>

#include "codekc/rng.hpp"

namespace codekc::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

enum class Activation { None, Sigmoid, Tanh, Relu, Softmax };

double sigmoid(double x);
Mat sigmoid(const Mat& x);
Mat apply_activation(const Mat& z, Activation act);

// Row-wise stable softmax; rows sum to 1.
Mat softmax_rows(const Mat& z);

// y = act(x W + b), applied row-wise over the leading axis.
Mat dense_forward(const Mat& x, const Mat& W, const RowVec& b, Activation act);

// Row lookup; ids must lie in [0, E.rows()). Row 0 is the padding row.
Mat embedding_forward(const Eigen::VectorXi& ids, const Mat& E);

// Sinusoidal positional encoding, shape [length, dim]; dim must be even.
// PE(p, 2i) = sin(p / 10000^(2i/dim)), PE(p, 2i+1) = cos(p / 10000^(2i/dim)).
Mat positional_encoding(int length, int dim);

// Inverted dropout mask: entries are 0 with probability rate, else 1/(1-rate).
Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng);

// training=false or rate=0 returns x unchanged.
Mat dropout(const Mat& x, double rate, bool training, Rng& rng);

// Mean binary cross-entropy over all coefficients, probabilities clamped away
// from {0,1}.
double bce_mean(const Vec& predictions, const Vec& labels);

// Elementwise binary entropy H(a) = -a ln a - (1-a) ln(1-a), with H(0)=H(1)=0.
double binary_entropy(double a);

}  // namespace codekc::nn
