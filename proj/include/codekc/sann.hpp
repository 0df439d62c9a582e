#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "codekc/nn/gradcheck.hpp"
#include "codekc/nn/optim.hpp"
#include "codekc/pattern.hpp"

namespace codekc::sann {

using nn::Mat;
using nn::Parameter;
using nn::RowVec;
using nn::Vec;

struct SannConfig {
  int embed_dim = 128;  // node and subtree embedding width
  double entropy_weight = 3e-5;
  double attention_threshold = 0.2;
  double learning_rate = 0.001;
  int epochs = 100;
  int patience = 20;
  int batch_size = 16;
  std::uint64_t seed = 11;
};

struct AttentionResult {
  std::vector<double> weights;  // aligned with slots; masked slots report 0
  double prediction = 0.5;      // P(correct)
  std::vector<int> important;   // slot indices with weight > threshold
};

// Subtree-attention correctness classifier. Per subtree: mean node embedding
// concatenated with the subtree embedding, a tanh combiner, an independent
// sigmoid attention weight; the attention-weighted sum of subtree vectors
// feeds a sigmoid output head.
class SannModel {
 public:
  SannModel() = default;
  SannModel(int node_vocab, int subtree_vocab, const SannConfig& config, Rng& rng);

  AttentionResult forward(const pattern::EncodedSequence& enc) const;

  // Accumulates gradients for one sample of the batch loss
  //   bce_scale * BCE(p, label) + entropy_scale * sum_s H(a_s).
  // Returns the forward result.
  AttentionResult forward_backward(const pattern::EncodedSequence& enc, double label,
                                   double bce_scale, double entropy_scale);

  std::vector<Parameter*> params();

  const SannConfig& config() const { return config_; }
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  SannConfig config_;
  Parameter node_embed_;     // [Vn, E], row 0 pinned zero
  Parameter subtree_embed_;  // [Vs, E], row 0 pinned zero
  Parameter combiner_w_;     // [2E, E], tanh
  Parameter combiner_b_;     // [1, E]
  Parameter attn_w_;         // [E, 1]
  Parameter attn_b_;         // [1, 1]
  Parameter head_w_;         // [E, 1]
  Parameter head_b_;         // [1, 1]
};

// mean BCE + entropy_weight * mean over unmasked slots of H(a).
double sann_loss(const Vec& predictions, const Vec& labels,
                 std::span<const double> unmasked_attention, double entropy_weight);

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = -1;
  double best_val = 0.0;
};

// Minibatch Adamax with early stopping on validation BCE (patience from the
// config); restores best-validation parameters. Deterministic under seed.
SannModel train_sann(std::span<const pattern::EncodedSequence> train, const Vec& train_labels,
                     std::span<const pattern::EncodedSequence> val, const Vec& val_labels,
                     int node_vocab, int subtree_vocab, const SannConfig& config,
                     TrainHistory* history = nullptr);

struct ImportantRecord {
  pattern::SubmissionRef submission;
  std::size_t position = 0;  // pre-order anchor index in the source AST
  std::string canon_normalized;
  double weight = 0.0;
  bool label_correct = false;
};

// One record per unmasked subtree with attention weight > threshold.
std::vector<ImportantRecord> extract_important(const pattern::SubtreeSequence& seq,
                                               const pattern::EncodedSequence& enc,
                                               bool label_correct, const SannModel& model,
                                               double threshold);

}  // namespace codekc::sann
