#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "codekc/nn/lstm.hpp"
#include "codekc/pattern.hpp"

namespace codekc::vae {

using nn::Lstm;
using nn::Mat;
using nn::Parameter;
using nn::RowVec;
using nn::Vec;

struct VaeConfig {
  int node_embed_dim = 64;  // even (positional encoding)
  int node_hidden = 64;
  int subtree_embed_dim = 64;
  int combiner_dim = 64;
  int seq_hidden = 128;
  int latent_dim = 128;
  double beta = 1e-2;
  double dropout = 0.2;
  double learning_rate = 0.001;
  int epochs = 30;
  int patience = 10;
  int batch_size = 16;
  double train_frac = 0.6;
  double val_frac = 0.2;
  double test_frac = 0.2;
  std::uint64_t seed = 13;
};

struct LatentCode {
  Vec mu;
  Vec log_var;
  Vec z;
  Vec eps;  // the draw behind z (zero in eval mode)
};

// z = mu + exp(0.5 log_var) (.) eps
Vec reparameterize(const Vec& mu, const Vec& log_var, const Vec& eps);

// -1/2 sum_j (1 + log var_j - mu_j^2 - var_j); >= 0, 0 iff standard normal.
double kl_loss(const Vec& mu, const Vec& log_var);

// -sum over masked positions of log softmax(logits_t)[target_t]; unmasked
// positions contribute nothing.
double recon_loss(const Mat& logits, const Eigen::VectorXi& targets,
                  std::span<const std::uint8_t> mask);

double vae_total_loss(double recon, double kl, double beta);

// One training item: an encoded sequence, its attention weights, and the
// reconstruction targets (important-subtree ids at their positions, padding
// id 0 elsewhere; `important` marks which positions carry loss).
struct VaeSample {
  const pattern::EncodedSequence* enc = nullptr;
  std::vector<double> weights;
  Eigen::VectorXi targets;
  std::vector<std::uint8_t> important;
};

// Frozen per-encode randomness, so gradient checks can re-run the forward
// pass bit-identically.
struct VaeNoise {
  Vec eps;          // [latent_dim]
  RowVec drop_mask;  // [seq_hidden], inverted-dropout scaling
};

// Sequence beta-VAE. Encoder: per-subtree node LSTM over positionally
// encoded node embeddings, concatenated with the subtree-id embedding, a
// tanh combiner, multiplicative attention scaling, then a sequence LSTM,
// dropout, and mu / log-variance heads. Decoder: the latent repeated across
// the sequence through an LSTM and a softmax over the subtree vocabulary.
class VaeModel {
 public:
  VaeModel() = default;
  VaeModel(int node_vocab, int subtree_vocab, const VaeConfig& config, Rng& rng);

  LatentCode encode(const pattern::EncodedSequence& enc, std::span<const double> weights,
                    bool training, const VaeNoise* noise = nullptr) const;
  Mat decode_logits(const Vec& z, int steps) const;

  double loss(const VaeSample& sample, bool training, const VaeNoise* noise) const;
  // Accumulates scale * d(total loss) into parameter grads; returns the loss.
  double loss_backward(const VaeSample& sample, bool training, const VaeNoise* noise, double scale);

  // (slot, predicted subtree id) at each position with weight > threshold;
  // argmax excludes the padding and unknown ids.
  std::vector<std::pair<int, int>> predict_representative(const pattern::EncodedSequence& enc,
                                                          std::span<const double> weights,
                                                          double threshold) const;

  VaeNoise make_noise(Rng& rng) const;
  std::vector<Parameter*> params();
  const VaeConfig& config() const { return config_; }
  int subtree_vocab() const { return static_cast<int>(out_w_.value.cols()); }
  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  struct Forward;
  void run_forward(const pattern::EncodedSequence& enc, std::span<const double> weights,
                   bool training, const VaeNoise* noise, Forward& fwd) const;

  VaeConfig config_;
  bool trained_ = false;
  Parameter node_embed_;     // [Vn, De], row 0 pinned
  Lstm node_lstm_;           // De -> Hn
  Parameter subtree_embed_;  // [Vs, Ds], row 0 pinned
  Parameter comb_w_;         // [Hn+Ds, Dc]
  Parameter comb_b_;         // [1, Dc]
  Lstm enc_lstm_;            // Dc -> Hs
  Parameter mu_w_;           // [Hs, Dz]
  Parameter mu_b_;
  Parameter logvar_w_;  // [Hs, Dz]
  Parameter logvar_b_;
  Lstm dec_lstm_;    // Dz -> Hs
  Parameter out_w_;  // [Hs, Vs]
  Parameter out_b_;
};

struct VaeHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = -1;
  double best_val = 0.0;
  double val_masked_accuracy = 0.0;
  double test_masked_accuracy = 0.0;
};

// Guard: every sample must come from a correct-labeled submission. Splits
// the samples 60:20:20 (per config) internally, trains with Adamax and early
// stopping on validation total loss, restores the best parameters.
VaeModel train_vae(std::span<const VaeSample> samples, std::span<const std::uint8_t> labels_correct,
                   int node_vocab, int subtree_vocab, const VaeConfig& config,
                   VaeHistory* history = nullptr);

// Fraction of important positions whose decoder argmax equals the target.
double masked_token_accuracy(const VaeModel& model, std::span<const VaeSample> samples);

}  // namespace codekc::vae
