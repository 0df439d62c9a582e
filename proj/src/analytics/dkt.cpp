#include "codekc/analytics/dkt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "codekc/analytics/auc.hpp"
#include "codekc/errors.hpp"

namespace codekc::analytics {

Vec dkt_encode(const DktStep& step, int m_problems, int k_kcs, bool with_kc) {
  if (step.q < 0 || step.q >= m_problems)
    throw ValidationError("dkt_encode: problem index " + std::to_string(step.q) +
                          " out of range [0, " + std::to_string(m_problems) + ")");
  int dim = 2 * m_problems + (with_kc ? k_kcs : 0);
  Vec x = Vec::Zero(dim);
  x(step.q + m_problems * (1 - step.a)) = 1.0;
  if (with_kc) {
    for (int k = 0; k < k_kcs; ++k) {
      double bit = static_cast<std::size_t>(k) < step.kc_bits.size() && step.kc_bits[static_cast<std::size_t>(k)]
                       ? 1.0
                       : 0.0;
      x(2 * m_problems + k) = bit;
    }
  }
  return x;
}

DktModel::DktModel(int m_problems, int k_kcs, bool with_kc, const DktConfig& config, Rng& rng)
    : config_(config), m_(m_problems), k_(k_kcs), with_kc_(with_kc) {
  int d_in = 2 * m_problems + (with_kc ? k_kcs : 0);
  lstm_.init(d_in, config.hidden, rng, "dkt.lstm");
  out_w_.name = "dkt.out_w";
  out_w_.init_glorot(config.hidden, m_problems, rng);
  out_b_.name = "dkt.out_b";
  out_b_.init_zero(1, m_problems);
}

std::vector<Parameter*> DktModel::params() {
  std::vector<Parameter*> list = {&out_w_, &out_b_};
  for (Parameter* p : lstm_.params()) list.push_back(p);
  return list;
}

Mat DktModel::encode_inputs(const DktSequence& seq) const {
  Mat x(static_cast<Eigen::Index>(seq.steps.size()), 2 * m_ + (with_kc_ ? k_ : 0));
  for (std::size_t t = 0; t < seq.steps.size(); ++t)
    x.row(static_cast<Eigen::Index>(t)) = dkt_encode(seq.steps[t], m_, k_, with_kc_).transpose();
  return x;
}

Mat DktModel::forward_probs(const DktSequence& seq) const {
  Mat x = encode_inputs(seq);
  Vec zero = Vec::Zero(config_.hidden);
  nn::LstmCache cache = nn::lstm_forward(lstm_, x, zero, zero);
  Mat logits = (cache.h * out_w_.value).rowwise() + nn::RowVec(out_b_.value);
  return nn::sigmoid(logits);
}

double DktModel::loss_backward(const DktSequence& seq, double scale, Rng& rng) {
  const auto T = static_cast<Eigen::Index>(seq.steps.size());
  if (T < 2) return 0.0;
  Mat x = encode_inputs(seq);
  Vec zero = Vec::Zero(config_.hidden);
  nn::LstmCache cache = nn::lstm_forward(lstm_, x, zero, zero);
  Mat mask = config_.dropout > 0.0
                 ? nn::dropout_mask(T, config_.hidden, config_.dropout, rng)
                 : Mat::Ones(T, config_.hidden);
  Mat h_drop = cache.h.cwiseProduct(mask);
  Mat logits = (h_drop * out_w_.value).rowwise() + nn::RowVec(out_b_.value);

  double bce_sum = 0.0;
  Mat dlogits = Mat::Zero(T, m_);
  for (Eigen::Index t = 0; t + 1 < T; ++t) {
    int q_next = seq.steps[static_cast<std::size_t>(t + 1)].q;
    double a_next = seq.steps[static_cast<std::size_t>(t + 1)].a;
    double p = nn::sigmoid(logits(t, q_next));
    double pc = std::clamp(p, 1e-12, 1.0 - 1e-12);
    bce_sum += -(a_next * std::log(pc) + (1.0 - a_next) * std::log(1.0 - pc));
    dlogits(t, q_next) = (p - a_next) * scale;
  }

  out_w_.grad += h_drop.transpose() * dlogits;
  out_b_.grad += dlogits.colwise().sum();
  Mat dh = (dlogits * out_w_.value.transpose()).cwiseProduct(mask);
  nn::lstm_backward(lstm_, cache, dh, zero, zero);
  return bce_sum;
}

std::vector<DktEvent> dkt_events(const DktModel& model, std::span<const DktSequence> sequences) {
  std::vector<DktEvent> events;
  for (const DktSequence& seq : sequences) {
    if (seq.steps.size() < 2) continue;
    Mat probs = model.forward_probs(seq);
    for (std::size_t t = 0; t + 1 < seq.steps.size(); ++t) {
      DktEvent e;
      e.next_problem = seq.steps[t + 1].q;
      e.score = probs(static_cast<Eigen::Index>(t), e.next_problem);
      e.label = seq.steps[t + 1].a;
      events.push_back(e);
    }
  }
  return events;
}

double dkt_auc(const DktModel& model, std::span<const DktSequence> sequences) {
  std::vector<DktEvent> events = dkt_events(model, sequences);
  std::vector<double> scores;
  std::vector<int> labels;
  for (const DktEvent& e : events) {
    scores.push_back(e.score);
    labels.push_back(e.label);
  }
  return evaluate_auc(scores, labels);
}

DktModel train_dkt(std::span<const DktSequence> train, std::span<const DktSequence> val,
                   int m_problems, int k_kcs, bool with_kc, const DktConfig& config,
                   DktHistory* history) {
  std::vector<const DktSequence*> usable;
  for (const DktSequence& seq : train)
    if (seq.steps.size() >= 2) usable.push_back(&seq);
  if (usable.empty()) throw ValidationError("train_dkt: every training sequence has fewer than 2 steps");

  Rng rng(config.seed);
  DktModel model(m_problems, k_kcs, with_kc, config, rng);
  auto params = model.params();

  std::vector<std::size_t> order(usable.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best_val = -std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  std::vector<Mat> best_params = nn::snapshot(params);
  int since_best = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t epoch_events = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::size_t n_events = 0;
      for (std::size_t i = start; i < end; ++i) n_events += usable[order[i]]->steps.size() - 1;
      if (n_events == 0) continue;
      for (Parameter* p : params) p->zero_grad();
      double scale = 1.0 / static_cast<double>(n_events);
      for (std::size_t i = start; i < end; ++i)
        epoch_loss += model.loss_backward(*usable[order[i]], scale, rng);
      for (Parameter* p : params) p->step(config.learning_rate);
      epoch_events += n_events;
    }
    epoch_loss /= static_cast<double>(std::max<std::size_t>(1, epoch_events));

    double vauc = 0.5;
    if (!val.empty()) {
      try {
        vauc = dkt_auc(model, val);
      } catch (const ValidationError&) {
        vauc = 0.5;  // degenerate validation labels
      }
    }
    if (history) {
      history->train_loss.push_back(epoch_loss);
      history->val_auc.push_back(vauc);
    }
    if (vauc > best_val + 1e-12) {
      best_val = vauc;
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
    history->best_val_auc = best_val;
  }
  return model;
}

}  // namespace codekc::analytics
