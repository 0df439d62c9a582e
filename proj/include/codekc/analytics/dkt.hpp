#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "codekc/nn/lstm.hpp"

namespace codekc::analytics {

using nn::Mat;
using nn::Parameter;
using nn::Vec;

struct DktStep {
  int q = 0;  // problem index, 0..M-1
  int a = 0;  // correctness
  std::vector<std::uint8_t> kc_bits;  // length K; optional (empty = zeros)
};

struct DktSequence {
  std::string student_id;
  std::vector<DktStep> steps;  // ordered by attempt
};

// One-hot interaction encoding of length 2M (+K when with_kc): index
// q + M*(1-a) is set, KC bits appended verbatim.
Vec dkt_encode(const DktStep& step, int m_problems, int k_kcs, bool with_kc);

struct DktConfig {
  int hidden = 512;
  double dropout = 0.1;
  double learning_rate = 0.01;
  int epochs = 100;
  int patience = 10;
  int batch_size = 8;
  std::uint64_t seed = 19;
};

// LSTM over interaction encodings with an M-way sigmoid head; y_t[q] is the
// predicted probability of solving problem q correctly after step t.
class DktModel {
 public:
  DktModel() = default;
  DktModel(int m_problems, int k_kcs, bool with_kc, const DktConfig& config, Rng& rng);

  Mat forward_probs(const DktSequence& seq) const;  // [T, M], eval mode

  // Accumulates gradients of scale * sum over events of BCE(y_t[q_{t+1}],
  // a_{t+1}); returns that BCE sum (unscaled). Dropout masks come from rng.
  double loss_backward(const DktSequence& seq, double scale, Rng& rng);

  std::vector<Parameter*> params();
  int problems() const { return m_; }
  int kcs() const { return k_; }
  bool with_kc() const { return with_kc_; }
  const DktConfig& config() const { return config_; }

 private:
  Mat encode_inputs(const DktSequence& seq) const;

  DktConfig config_;
  int m_ = 0, k_ = 0;
  bool with_kc_ = false;
  nn::Lstm lstm_;
  Parameter out_w_;  // [H, M]
  Parameter out_b_;  // [1, M]
};

struct DktEvent {
  double score = 0.0;
  int label = 0;
  int next_problem = 0;  // for per-assignment grouping
};

// Prediction events (t -> t+1) for every sequence with >= 2 steps.
std::vector<DktEvent> dkt_events(const DktModel& model, std::span<const DktSequence> sequences);

double dkt_auc(const DktModel& model, std::span<const DktSequence> sequences);

struct DktHistory {
  std::vector<double> train_loss;
  std::vector<double> val_auc;
  int best_epoch = -1;
  double best_val_auc = 0.0;
};

// Adamax training with early stopping on validation AUC. Sequences with
// fewer than 2 steps are skipped; throws when none remain.
DktModel train_dkt(std::span<const DktSequence> train, std::span<const DktSequence> val,
                   int m_problems, int k_kcs, bool with_kc, const DktConfig& config,
                   DktHistory* history = nullptr);

}  // namespace codekc::analytics
