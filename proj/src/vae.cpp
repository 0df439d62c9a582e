#include "codekc/vae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "codekc/errors.hpp"
#include "codekc/nn/checkpoint.hpp"

namespace codekc::vae {

Vec reparameterize(const Vec& mu, const Vec& log_var, const Vec& eps) {
  if (mu.size() != log_var.size() || mu.size() != eps.size())
    throw ValidationError("reparameterize: shape mismatch");
  return mu.array() + (0.5 * log_var.array()).exp() * eps.array();
}

double kl_loss(const Vec& mu, const Vec& log_var) {
  if (mu.size() != log_var.size()) throw ValidationError("kl_loss: shape mismatch");
  return -0.5 * (1.0 + log_var.array() - mu.array().square() - log_var.array().exp()).sum();
}

double recon_loss(const Mat& logits, const Eigen::VectorXi& targets,
                  std::span<const std::uint8_t> mask) {
  if (logits.rows() != targets.size())
    throw ValidationError("recon_loss: logits/target length mismatch");
  double total = 0.0;
  for (Eigen::Index t = 0; t < logits.rows(); ++t) {
    if (static_cast<std::size_t>(t) >= mask.size() || !mask[static_cast<std::size_t>(t)]) continue;
    int target = targets(t);
    if (target < 0 || target >= logits.cols())
      throw ValidationError("recon_loss: target id out of vocabulary");
    double mx = logits.row(t).maxCoeff();
    double lse = std::log((logits.row(t).array() - mx).exp().sum());
    total -= logits(t, target) - mx - lse;
  }
  return total;
}

double vae_total_loss(double recon, double kl, double beta) { return recon + beta * kl; }

VaeModel::VaeModel(int node_vocab, int subtree_vocab, const VaeConfig& config, Rng& rng)
    : config_(config) {
  if (config.node_embed_dim % 2 != 0)
    throw ValidationError("vae: node_embed_dim must be even for positional encoding");
  node_embed_.name = "vae.node_embed";
  node_embed_.pad_row_zero = true;
  node_embed_.init_glorot(node_vocab, config.node_embed_dim, rng);
  node_lstm_.init(config.node_embed_dim, config.node_hidden, rng, "vae.node_lstm");
  subtree_embed_.name = "vae.subtree_embed";
  subtree_embed_.pad_row_zero = true;
  subtree_embed_.init_glorot(subtree_vocab, config.subtree_embed_dim, rng);
  comb_w_.name = "vae.comb_w";
  comb_w_.init_glorot(config.node_hidden + config.subtree_embed_dim, config.combiner_dim, rng);
  comb_b_.name = "vae.comb_b";
  comb_b_.init_zero(1, config.combiner_dim);
  enc_lstm_.init(config.combiner_dim, config.seq_hidden, rng, "vae.enc_lstm");
  mu_w_.name = "vae.mu_w";
  mu_w_.init_glorot(config.seq_hidden, config.latent_dim, rng);
  mu_b_.name = "vae.mu_b";
  mu_b_.init_zero(1, config.latent_dim);
  logvar_w_.name = "vae.logvar_w";
  logvar_w_.init_glorot(config.seq_hidden, config.latent_dim, rng);
  logvar_b_.name = "vae.logvar_b";
  logvar_b_.init_zero(1, config.latent_dim);
  dec_lstm_.init(config.latent_dim, config.seq_hidden, rng, "vae.dec_lstm");
  out_w_.name = "vae.out_w";
  out_w_.init_glorot(config.seq_hidden, subtree_vocab, rng);
  out_b_.name = "vae.out_b";
  out_b_.init_zero(1, subtree_vocab);
}

std::vector<Parameter*> VaeModel::params() {
  std::vector<Parameter*> list = {&node_embed_, &subtree_embed_, &comb_w_, &comb_b_,
                                  &mu_w_,       &mu_b_,          &logvar_w_, &logvar_b_,
                                  &out_w_,      &out_b_};
  for (Parameter* p : node_lstm_.params()) list.push_back(p);
  for (Parameter* p : enc_lstm_.params()) list.push_back(p);
  for (Parameter* p : dec_lstm_.params()) list.push_back(p);
  return list;
}

struct VaeModel::Forward {
  struct Slot {
    nn::LstmCache node_cache;
    Eigen::VectorXi ids;  // real node ids
    RowVec comb_in;
    RowVec u;  // pre-scale combiner output
    int subtree_id = 0;
  };
  std::vector<Slot> slots;
  Mat u_scaled;  // [T, Dc]
  nn::LstmCache enc_cache;
  RowVec h_enc;
  RowVec h_drop;
  RowVec mu;
  RowVec logvar;
  Vec eps;
  RowVec z;
  bool training = false;
  const VaeNoise* noise = nullptr;
};

void VaeModel::run_forward(const pattern::EncodedSequence& enc, std::span<const double> weights,
                           bool training, const VaeNoise* noise, Forward& fwd) const {
  if (node_embed_.value.size() == 0) throw ValidationError("vae: model not initialized");
  if (weights.size() < static_cast<std::size_t>(enc.len))
    throw ValidationError("vae: attention weights not aligned with the sequence");
  if (training && noise == nullptr) throw ValidationError("vae: training forward needs noise");

  const int T = enc.len;
  const int Hn = config_.node_hidden;
  const int Hs = config_.seq_hidden;
  fwd.training = training;
  fwd.noise = noise;
  fwd.slots.clear();
  fwd.slots.resize(static_cast<std::size_t>(T));
  fwd.u_scaled = Mat::Zero(T, config_.combiner_dim);

  Mat pe = nn::positional_encoding(
      T > 0 ? *std::max_element(enc.node_len.begin(), enc.node_len.begin() + T) : 1,
      config_.node_embed_dim);

  Vec zero_n = Vec::Zero(Hn);
  for (int s = 0; s < T; ++s) {
    auto& slot = fwd.slots[static_cast<std::size_t>(s)];
    int n = enc.node_len[static_cast<std::size_t>(s)];
    slot.ids = enc.node_ids.row(s).head(n).transpose();
    Mat x = nn::embedding_forward(slot.ids, node_embed_.value);
    if (n > 0) x += pe.topRows(n);
    slot.node_cache = nn::lstm_forward(node_lstm_, x, zero_n, zero_n);
    Vec h_node = nn::lstm_last_h(slot.node_cache);
    slot.subtree_id = enc.subtree_ids(s);
    slot.comb_in.resize(Hn + config_.subtree_embed_dim);
    slot.comb_in << h_node.transpose(), subtree_embed_.value.row(slot.subtree_id);
    RowVec pre = slot.comb_in * comb_w_.value + comb_b_.value;
    slot.u = pre.array().tanh().matrix();
    fwd.u_scaled.row(s) = weights[static_cast<std::size_t>(s)] * slot.u;
  }

  Vec zero_s = Vec::Zero(Hs);
  fwd.enc_cache = nn::lstm_forward(enc_lstm_, fwd.u_scaled, zero_s, zero_s);
  fwd.h_enc = nn::lstm_last_h(fwd.enc_cache).transpose();
  if (training && config_.dropout > 0.0)
    fwd.h_drop = fwd.h_enc.cwiseProduct(noise->drop_mask);
  else
    fwd.h_drop = fwd.h_enc;

  fwd.mu = fwd.h_drop * mu_w_.value + mu_b_.value;
  fwd.logvar = fwd.h_drop * logvar_w_.value + logvar_b_.value;
  if (training) {
    fwd.eps = noise->eps;
    fwd.z = reparameterize(fwd.mu.transpose(), fwd.logvar.transpose(), fwd.eps).transpose();
  } else {
    fwd.eps = Vec::Zero(config_.latent_dim);
    fwd.z = fwd.mu;
  }
}

LatentCode VaeModel::encode(const pattern::EncodedSequence& enc, std::span<const double> weights,
                            bool training, const VaeNoise* noise) const {
  Forward fwd;
  run_forward(enc, weights, training, noise, fwd);
  LatentCode code;
  code.mu = fwd.mu.transpose();
  code.log_var = fwd.logvar.transpose();
  code.z = fwd.z.transpose();
  code.eps = fwd.eps;
  return code;
}

Mat VaeModel::decode_logits(const Vec& z, int steps) const {
  Mat x_dec = z.transpose().replicate(steps, 1);
  Vec zero_s = Vec::Zero(config_.seq_hidden);
  nn::LstmCache cache = nn::lstm_forward(dec_lstm_, x_dec, zero_s, zero_s);
  return (cache.h * out_w_.value).rowwise() + RowVec(out_b_.value);
}

double VaeModel::loss(const VaeSample& sample, bool training, const VaeNoise* noise) const {
  Forward fwd;
  run_forward(*sample.enc, sample.weights, training, noise, fwd);
  Mat logits = decode_logits(fwd.z.transpose(), sample.enc->len);
  double recon = recon_loss(logits, sample.targets, sample.important);
  double kl = kl_loss(fwd.mu.transpose(), fwd.logvar.transpose());
  return vae_total_loss(recon, kl, config_.beta);
}

double VaeModel::loss_backward(const VaeSample& sample, bool training, const VaeNoise* noise,
                               double scale) {
  const pattern::EncodedSequence& enc = *sample.enc;
  const int T = enc.len;
  const int Hn = config_.node_hidden;
  const int Hs = config_.seq_hidden;
  const int Dz = config_.latent_dim;

  Forward fwd;
  run_forward(enc, sample.weights, training, noise, fwd);

  // Decoder forward (kept here for the cache).
  Mat x_dec = fwd.z.replicate(T, 1);
  Vec zero_s = Vec::Zero(Hs);
  nn::LstmCache dec_cache = nn::lstm_forward(dec_lstm_, x_dec, zero_s, zero_s);
  Mat logits = (dec_cache.h * out_w_.value).rowwise() + RowVec(out_b_.value);

  double recon = recon_loss(logits, sample.targets, sample.important);
  double kl = kl_loss(fwd.mu.transpose(), fwd.logvar.transpose());
  double total = vae_total_loss(recon, kl, config_.beta);

  // Softmax cross-entropy backward over important positions.
  Mat dlogits = Mat::Zero(T, logits.cols());
  for (int t = 0; t < T; ++t) {
    if (static_cast<std::size_t>(t) >= sample.important.size() || !sample.important[static_cast<std::size_t>(t)])
      continue;
    RowVec p = nn::softmax_rows(logits.row(t));
    dlogits.row(t) = scale * p;
    dlogits(t, sample.targets(t)) -= scale;
  }

  RowVec dz = RowVec::Zero(Dz);
  if (T > 0) {
    out_w_.grad += dec_cache.h.transpose() * dlogits;
    out_b_.grad += dlogits.colwise().sum();
    Mat d_dech = dlogits * out_w_.value.transpose();
    Mat dx_dec = nn::lstm_backward(dec_lstm_, dec_cache, d_dech, zero_s, zero_s);
    dz = dx_dec.colwise().sum();
  }

  // Reparameterization + KL.
  RowVec dmu = dz;
  RowVec dlogvar = RowVec::Zero(Dz);
  if (training) {
    dlogvar = (dz.array() * fwd.eps.transpose().array() * (0.5 * fwd.logvar.array()).exp() * 0.5)
                  .matrix();
  }
  dmu += scale * config_.beta * fwd.mu;
  dlogvar += (scale * config_.beta * 0.5 * (fwd.logvar.array().exp() - 1.0)).matrix();

  mu_w_.grad += fwd.h_drop.transpose() * dmu;
  mu_b_.grad += dmu;
  logvar_w_.grad += fwd.h_drop.transpose() * dlogvar;
  logvar_b_.grad += dlogvar;

  RowVec dh_drop = dmu * mu_w_.value.transpose() + dlogvar * logvar_w_.value.transpose();
  RowVec dh_enc = (training && config_.dropout > 0.0) ? RowVec(dh_drop.cwiseProduct(noise->drop_mask))
                                                      : dh_drop;

  if (T > 0) {
    Mat dU = nn::lstm_backward(enc_lstm_, fwd.enc_cache, Mat::Zero(T, Hs), dh_enc.transpose(),
                               Vec::Zero(Hs));
    Vec zero_n = Vec::Zero(Hn);
    for (int s = 0; s < T; ++s) {
      auto& slot = fwd.slots[static_cast<std::size_t>(s)];
      RowVec du = sample.weights[static_cast<std::size_t>(s)] * dU.row(s);
      RowVec dpre = (du.array() * (1.0 - slot.u.array().square())).matrix();
      comb_w_.grad += slot.comb_in.transpose() * dpre;
      comb_b_.grad += dpre;
      RowVec dcomb = dpre * comb_w_.value.transpose();
      Vec dh_node = dcomb.head(Hn).transpose();
      RowVec d_sub = dcomb.tail(config_.subtree_embed_dim);
      if (slot.subtree_id != 0) subtree_embed_.grad.row(slot.subtree_id) += d_sub;
      int n = static_cast<int>(slot.ids.size());
      if (n > 0) {
        Mat dx = nn::lstm_backward(node_lstm_, slot.node_cache, Mat::Zero(n, Hn), dh_node,
                                   zero_n);
        for (int j = 0; j < n; ++j) {
          int id = slot.ids(j);
          if (id != 0) node_embed_.grad.row(id) += dx.row(j);
        }
      }
    }
  }

  return total;
}

std::vector<std::pair<int, int>> VaeModel::predict_representative(
    const pattern::EncodedSequence& enc, std::span<const double> weights, double threshold) const {
  if (!trained_) throw ValidationError("predict_representative: model is untrained");
  std::vector<std::pair<int, int>> out;
  std::vector<int> high;
  for (int s = 0; s < enc.len; ++s)
    if (weights[static_cast<std::size_t>(s)] > threshold) high.push_back(s);
  if (high.empty()) return out;

  LatentCode code = encode(enc, weights, false, nullptr);
  Mat logits = decode_logits(code.z, enc.len);
  for (int s : high) {
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int v = 2; v < logits.cols(); ++v) {  // skip padding and unknown
      if (logits(s, v) > best_score) {
        best_score = logits(s, v);
        best = v;
      }
    }
    if (best >= 0) out.push_back({s, best});
  }
  return out;
}

VaeNoise VaeModel::make_noise(Rng& rng) const {
  VaeNoise noise;
  noise.eps = Vec(config_.latent_dim);
  for (int i = 0; i < config_.latent_dim; ++i) noise.eps(i) = rng.normal();
  noise.drop_mask = nn::dropout_mask(1, config_.seq_hidden, config_.dropout, rng).row(0);
  return noise;
}

void VaeModel::save(const std::string& path) const {
  auto list = const_cast<VaeModel*>(this)->params();
  nn::save_parameters(path, list);
}

void VaeModel::load(const std::string& path) {
  nn::load_parameters(path, params());
  trained_ = true;
}

namespace {

std::array<std::size_t, 3> fraction_counts(std::size_t n, double f_train, double f_val) {
  auto n_train = static_cast<std::size_t>(f_train * static_cast<double>(n) + 0.5);
  auto n_val = static_cast<std::size_t>(f_val * static_cast<double>(n) + 0.5);
  n_train = std::min(n_train, n);
  n_val = std::min(n_val, n - n_train);
  return {n_train, n_val, n - n_train - n_val};
}

}  // namespace

VaeModel train_vae(std::span<const VaeSample> samples, std::span<const std::uint8_t> labels_correct,
                   int node_vocab, int subtree_vocab, const VaeConfig& config, VaeHistory* history) {
  if (samples.size() != labels_correct.size())
    throw ValidationError("train_vae: label count mismatch");
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (!labels_correct[i])
      throw ValidationError("train_vae: input contains an incorrect-labeled submission");

  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (samples[i].enc != nullptr && samples[i].enc->len > 0) usable.push_back(i);
  if (usable.empty()) throw ValidationError("train_vae: no non-empty sequences to train on");

  Rng rng(config.seed);
  rng.shuffle(usable);
  auto counts = fraction_counts(usable.size(), config.train_frac, config.val_frac);
  std::vector<std::size_t> train_idx(usable.begin(), usable.begin() + static_cast<std::ptrdiff_t>(counts[0]));
  std::vector<std::size_t> val_idx(usable.begin() + static_cast<std::ptrdiff_t>(counts[0]),
                                   usable.begin() + static_cast<std::ptrdiff_t>(counts[0] + counts[1]));
  std::vector<std::size_t> test_idx(usable.begin() + static_cast<std::ptrdiff_t>(counts[0] + counts[1]),
                                    usable.end());
  if (train_idx.empty()) throw ValidationError("train_vae: training split is empty");

  VaeModel model(node_vocab, subtree_vocab, config, rng);
  auto params = model.params();

  auto mean_eval_loss = [&](const std::vector<std::size_t>& idx) {
    if (idx.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i : idx) total += model.loss(samples[i], false, nullptr);
    return total / static_cast<double>(idx.size());
  };

  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  std::vector<Mat> best_params = nn::snapshot(params);
  int since_best = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(train_idx);
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < train_idx.size(); start += static_cast<std::size_t>(config.batch_size)) {
      std::size_t end = std::min(train_idx.size(), start + static_cast<std::size_t>(config.batch_size));
      double batch_scale = 1.0 / static_cast<double>(end - start);
      for (Parameter* p : params) p->zero_grad();
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        VaeNoise noise = model.make_noise(rng);
        batch_loss += model.loss_backward(samples[train_idx[i]], true, &noise, batch_scale);
      }
      for (Parameter* p : params) p->step(config.learning_rate);
      epoch_loss += batch_loss * batch_scale;
      ++n_batches;
    }
    epoch_loss /= static_cast<double>(std::max<std::size_t>(1, n_batches));

    double vloss = val_idx.empty() ? epoch_loss : mean_eval_loss(val_idx);
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
  model.mark_trained();
  if (history) {
    history->best_epoch = best_epoch;
    history->best_val = best_val;
    std::vector<VaeSample> val_samples, test_samples;
    for (std::size_t i : val_idx) val_samples.push_back(samples[i]);
    for (std::size_t i : test_idx) test_samples.push_back(samples[i]);
    history->val_masked_accuracy = masked_token_accuracy(model, val_samples);
    history->test_masked_accuracy = masked_token_accuracy(model, test_samples);
  }
  return model;
}

double masked_token_accuracy(const VaeModel& model, std::span<const VaeSample> samples) {
  std::size_t hits = 0, total = 0;
  for (const VaeSample& sample : samples) {
    if (sample.enc == nullptr || sample.enc->len == 0) continue;
    LatentCode code = model.encode(*sample.enc, sample.weights, false, nullptr);
    Mat logits = model.decode_logits(code.z, sample.enc->len);
    for (int t = 0; t < sample.enc->len; ++t) {
      if (static_cast<std::size_t>(t) >= sample.important.size() || !sample.important[static_cast<std::size_t>(t)])
        continue;
      Eigen::Index best;
      logits.row(t).maxCoeff(&best);
      ++total;
      if (static_cast<int>(best) == sample.targets(t)) ++hits;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace codekc::vae
