#include "codekc/sann.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "codekc/errors.hpp"
#include "codekc/nn/checkpoint.hpp"

namespace codekc::sann {

namespace {

struct SlotCache {
  RowVec node_mean;   // [E]
  RowVec comb_in;     // [2E]
  RowVec v;           // [E]
  double score = 0.0;
  double a = 0.0;
  int subtree_id = 0;
};

}  // namespace

SannModel::SannModel(int node_vocab, int subtree_vocab, const SannConfig& config, Rng& rng)
    : config_(config) {
  const int E = config.embed_dim;
  node_embed_.name = "sann.node_embed";
  node_embed_.pad_row_zero = true;
  node_embed_.init_glorot(node_vocab, E, rng);
  subtree_embed_.name = "sann.subtree_embed";
  subtree_embed_.pad_row_zero = true;
  subtree_embed_.init_glorot(subtree_vocab, E, rng);
  combiner_w_.name = "sann.combiner_w";
  combiner_w_.init_glorot(2 * E, E, rng);
  combiner_b_.name = "sann.combiner_b";
  combiner_b_.init_zero(1, E);
  attn_w_.name = "sann.attn_w";
  attn_w_.init_glorot(E, 1, rng);
  attn_b_.name = "sann.attn_b";
  attn_b_.init_zero(1, 1);
  head_w_.name = "sann.head_w";
  head_w_.init_glorot(E, 1, rng);
  head_b_.name = "sann.head_b";
  head_b_.init_zero(1, 1);
}

std::vector<Parameter*> SannModel::params() {
  return {&node_embed_, &subtree_embed_, &combiner_w_, &combiner_b_,
          &attn_w_,     &attn_b_,        &head_w_,     &head_b_};
}

namespace {

// Shared forward pass; fills slot caches and the context vector.
void run_forward(const pattern::EncodedSequence& enc, const Parameter& node_embed,
                 const Parameter& subtree_embed, const Parameter& combiner_w,
                 const Parameter& combiner_b, const Parameter& attn_w, const Parameter& attn_b,
                 int embed_dim, std::vector<SlotCache>& slots, RowVec& context) {
  if (enc.node_ids.rows() != enc.subtree_ids.size())
    throw ValidationError("sann: node grid and subtree id shapes disagree");
  context = RowVec::Zero(embed_dim);
  slots.clear();
  slots.reserve(static_cast<std::size_t>(enc.len));
  for (int s = 0; s < enc.len; ++s) {
    SlotCache slot;
    slot.subtree_id = enc.subtree_ids(s);
    if (slot.subtree_id < 0 || slot.subtree_id >= subtree_embed.value.rows())
      throw ValidationError("sann: subtree id out of vocabulary range");
    int n = enc.node_len[static_cast<std::size_t>(s)];
    slot.node_mean = RowVec::Zero(embed_dim);
    for (int j = 0; j < n; ++j) {
      int id = enc.node_ids(s, j);
      if (id < 0 || id >= node_embed.value.rows())
        throw ValidationError("sann: node id out of vocabulary range");
      slot.node_mean += node_embed.value.row(id);
    }
    if (n > 0) slot.node_mean /= static_cast<double>(n);
    slot.comb_in.resize(2 * embed_dim);
    slot.comb_in << slot.node_mean, subtree_embed.value.row(slot.subtree_id);
    RowVec pre = slot.comb_in * combiner_w.value + combiner_b.value;
    slot.v = pre.array().tanh().matrix();
    slot.score = (slot.v * attn_w.value)(0) + attn_b.value(0, 0);
    slot.a = nn::sigmoid(slot.score);
    context += slot.a * slot.v;
    slots.push_back(std::move(slot));
  }
}

}  // namespace

AttentionResult SannModel::forward(const pattern::EncodedSequence& enc) const {
  std::vector<SlotCache> slots;
  RowVec context;
  run_forward(enc, node_embed_, subtree_embed_, combiner_w_, combiner_b_, attn_w_, attn_b_,
              config_.embed_dim, slots, context);
  AttentionResult result;
  result.weights.assign(enc.mask.size(), 0.0);
  double logit = (context * head_w_.value)(0) + head_b_.value(0, 0);
  result.prediction = nn::sigmoid(logit);
  for (int s = 0; s < enc.len; ++s) {
    result.weights[static_cast<std::size_t>(s)] = slots[static_cast<std::size_t>(s)].a;
    if (slots[static_cast<std::size_t>(s)].a > config_.attention_threshold) result.important.push_back(s);
  }
  return result;
}

AttentionResult SannModel::forward_backward(const pattern::EncodedSequence& enc, double label,
                                            double bce_scale, double entropy_scale) {
  const int E = config_.embed_dim;
  std::vector<SlotCache> slots;
  RowVec context;
  run_forward(enc, node_embed_, subtree_embed_, combiner_w_, combiner_b_, attn_w_, attn_b_, E,
              slots, context);

  AttentionResult result;
  result.weights.assign(enc.mask.size(), 0.0);
  double logit = (context * head_w_.value)(0) + head_b_.value(0, 0);
  result.prediction = nn::sigmoid(logit);
  for (int s = 0; s < enc.len; ++s) {
    result.weights[static_cast<std::size_t>(s)] = slots[static_cast<std::size_t>(s)].a;
    if (slots[static_cast<std::size_t>(s)].a > config_.attention_threshold) result.important.push_back(s);
  }

  // d BCE / d logit = p - y.
  double d_pred_logit = (result.prediction - label) * bce_scale;

  // Output head.
  head_w_.grad += context.transpose() * d_pred_logit;
  head_b_.grad(0, 0) += d_pred_logit;
  RowVec d_context = d_pred_logit * head_w_.value.transpose();

  for (int s = 0; s < enc.len; ++s) {
    SlotCache& slot = slots[static_cast<std::size_t>(s)];
    double d_a = (d_context * slot.v.transpose())(0);
    RowVec d_v = slot.a * d_context;
    // dH/da = ln((1-a)/a) = -score.
    d_a += entropy_scale * (-slot.score);
    double d_score = d_a * slot.a * (1.0 - slot.a);
    attn_w_.grad += slot.v.transpose() * d_score;
    attn_b_.grad(0, 0) += d_score;
    d_v += d_score * attn_w_.value.transpose();
    RowVec d_pre = (d_v.array() * (1.0 - slot.v.array().square())).matrix();
    combiner_w_.grad += slot.comb_in.transpose() * d_pre;
    combiner_b_.grad += d_pre;
    RowVec d_in = d_pre * combiner_w_.value.transpose();
    RowVec d_node_mean = d_in.head(E);
    RowVec d_sub = d_in.tail(E);
    if (slot.subtree_id != 0) subtree_embed_.grad.row(slot.subtree_id) += d_sub;
    int n = enc.node_len[static_cast<std::size_t>(s)];
    if (n > 0) {
      RowVec d_each = d_node_mean / static_cast<double>(n);
      for (int j = 0; j < n; ++j) {
        int id = enc.node_ids(s, j);
        if (id != 0) node_embed_.grad.row(id) += d_each;
      }
    }
  }

  return result;
}

double sann_loss(const Vec& predictions, const Vec& labels,
                 std::span<const double> unmasked_attention, double entropy_weight) {
  double loss = nn::bce_mean(predictions, labels);
  if (!unmasked_attention.empty() && entropy_weight != 0.0) {
    double h = 0.0;
    for (double a : unmasked_attention) h += nn::binary_entropy(a);
    loss += entropy_weight * h / static_cast<double>(unmasked_attention.size());
  }
  return loss;
}

void SannModel::save(const std::string& path) const {
  auto list = const_cast<SannModel*>(this)->params();
  nn::save_parameters(path, list);
}

void SannModel::load(const std::string& path) { nn::load_parameters(path, params()); }

namespace {

double validation_bce(SannModel& model, std::span<const pattern::EncodedSequence> val,
                      const Vec& val_labels) {
  Vec preds(static_cast<Eigen::Index>(val.size()));
  for (std::size_t i = 0; i < val.size(); ++i) preds(static_cast<Eigen::Index>(i)) = model.forward(val[i]).prediction;
  return nn::bce_mean(preds, val_labels);
}

}  // namespace

SannModel train_sann(std::span<const pattern::EncodedSequence> train, const Vec& train_labels,
                     std::span<const pattern::EncodedSequence> val, const Vec& val_labels,
                     int node_vocab, int subtree_vocab, const SannConfig& config,
                     TrainHistory* history) {
  if (train.empty()) throw ValidationError("train_sann: empty training set");
  if (static_cast<Eigen::Index>(train.size()) != train_labels.size())
    throw ValidationError("train_sann: label count mismatch");

  Rng rng(config.seed);
  SannModel model(node_vocab, subtree_vocab, config, rng);
  auto params = model.params();

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  std::vector<Mat> best_params = nn::snapshot(params);
  int since_best = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::size_t batch = end - start;
      std::size_t total_slots = 0;
      for (std::size_t i = start; i < end; ++i) total_slots += static_cast<std::size_t>(train[order[i]].len);

      for (Parameter* p : params) p->zero_grad();
      double bce_sum = 0.0, ent_sum = 0.0;
      double entropy_scale =
          total_slots == 0 ? 0.0 : config.entropy_weight / static_cast<double>(total_slots);
      for (std::size_t i = start; i < end; ++i) {
        const auto& enc = train[order[i]];
        double y = train_labels(static_cast<Eigen::Index>(order[i]));
        AttentionResult res = model.forward_backward(enc, y, 1.0 / static_cast<double>(batch),
                                                     entropy_scale);
        double p = std::clamp(res.prediction, 1e-12, 1.0 - 1e-12);
        bce_sum += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        for (int s = 0; s < enc.len; ++s) ent_sum += nn::binary_entropy(res.weights[static_cast<std::size_t>(s)]);
      }
      for (Parameter* p : params) p->step(config.learning_rate);
      double batch_loss = bce_sum / static_cast<double>(batch);
      if (total_slots > 0)
        batch_loss += config.entropy_weight * ent_sum / static_cast<double>(total_slots);
      epoch_loss += batch_loss;
      ++n_batches;
    }
    epoch_loss /= static_cast<double>(std::max<std::size_t>(1, n_batches));

    double vloss = val.empty() ? epoch_loss : validation_bce(model, val, val_labels);
    if (history) {
      history->train_loss.push_back(epoch_loss);
      history->val_loss.push_back(vloss);
    }
    if (vloss < best_val - 1e-12) {
      best_val = vloss;
      best_epoch = epoch;
      best_params = nn::snapshot(params);
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }

  nn::restore(params, best_params);
  if (history) {
    history->best_epoch = best_epoch;
    history->best_val = best_val;
  }
  return model;
}

std::vector<ImportantRecord> extract_important(const pattern::SubtreeSequence& seq,
                                               const pattern::EncodedSequence& enc,
                                               bool label_correct, const SannModel& model,
                                               double threshold) {
  AttentionResult res = model.forward(enc);
  std::vector<ImportantRecord> records;
  for (int s = 0; s < enc.len; ++s) {
    double w = res.weights[static_cast<std::size_t>(s)];
    if (w <= threshold) continue;
    const pattern::Subtree& st = seq.subtrees[static_cast<std::size_t>(s)];
    ImportantRecord rec;
    rec.submission = seq.submission;
    rec.position = st.position;
    rec.canon_normalized = pattern::serialize_subtree(pattern::normalize_tree(st.tree));
    rec.weight = w;
    rec.label_correct = label_correct;
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace codekc::sann
