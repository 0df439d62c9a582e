#include "codekc/vae.hpp"

#include <cmath>
#include <cstdio>

#include "codekc/errors.hpp"
#include "codekc/minilang.hpp"
#include "codekc/nn/gradcheck.hpp"
#include "doctest.h"

using namespace codekc;
using namespace codekc::vae;

namespace {

VaeConfig small_config() {
  VaeConfig config;
  config.node_embed_dim = 6;
  config.node_hidden = 5;
  config.subtree_embed_dim = 5;
  config.combiner_dim = 5;
  config.seq_hidden = 7;
  config.latent_dim = 4;
  config.batch_size = 4;
  config.seed = 31;
  return config;
}

// Tiny corpus of encoded sequences built from three statement shapes.
struct TinyData {
  pattern::Vocab vocab;
  std::vector<pattern::EncodedSequence> encodings;
  std::vector<VaeSample> samples;
  std::vector<std::uint8_t> labels;
};

TinyData make_tiny_data(int copies) {
  const char* programs[] = {
      "{ a = a + 1; while (a < b) { a = a + 1; } }",
      "{ if (a > b) { a = b; } }",
      "{ f(a, b); a = a + 1; }",
  };
  TinyData data;
  std::vector<pattern::SubtreeSequence> train_seqs;
  for (const char* p : programs)
    train_seqs.push_back(pattern::extract_subtrees(minilang::parse(p)));
  data.vocab = pattern::build_vocab(train_seqs);

  for (int copy = 0; copy < copies; ++copy) {
    for (const auto& seq : train_seqs) {
      pattern::EncodedSequence enc = pattern::encode_sequence(seq, data.vocab, 6, 24);
      data.encodings.push_back(std::move(enc));
    }
  }
  for (auto& enc : data.encodings) {
    VaeSample sample;
    sample.enc = &enc;
    sample.weights.assign(static_cast<std::size_t>(enc.mask.size()), 0.0);
    sample.targets = Eigen::VectorXi::Zero(enc.len);
    sample.important.assign(static_cast<std::size_t>(enc.len), 0);
    for (int s = 0; s < enc.len; ++s) {
      sample.weights[static_cast<std::size_t>(s)] = 0.9;  // all slots attended
      sample.targets(s) = enc.subtree_ids(s);
      sample.important[static_cast<std::size_t>(s)] = 1;
    }
    data.samples.push_back(std::move(sample));
    data.labels.push_back(1);
  }
  return data;
}

}  // namespace

TEST_CASE("reparameterize formula") {
  nn::Vec mu(1), lv(1), eps(1);
  mu << 0;
  lv << 0;
  eps << 0;
  CHECK(reparameterize(mu, lv, eps)(0) == 0.0);
  eps << 1;
  CHECK(reparameterize(mu, lv, eps)(0) == doctest::Approx(1.0).epsilon(1e-15));
  mu << 2;
  lv << std::log(4.0);
  eps << 0.5;
  CHECK(reparameterize(mu, lv, eps)(0) == doctest::Approx(3.0).epsilon(1e-12));
  nn::Vec bad(2);
  CHECK_THROWS_AS(reparameterize(mu, lv, bad), ValidationError);
}

TEST_CASE("kl_loss formula values") {
  nn::Vec mu(1), lv(1);
  mu << 0;
  lv << 0;
  CHECK(kl_loss(mu, lv) == 0.0);
  mu << 1;
  CHECK(kl_loss(mu, lv) == doctest::Approx(0.5).epsilon(1e-15));
  mu << 0;
  lv << std::log(4.0);
  CHECK(kl_loss(mu, lv) == doctest::Approx(-0.5 * (1.0 + std::log(4.0) - 4.0)).epsilon(1e-12));
  CHECK(kl_loss(mu, lv) == doctest::Approx(0.8068528194).epsilon(1e-9));
}

TEST_CASE("kl_loss is nonnegative (property)") {
  Rng rng(77);
  for (int round = 0; round < 500; ++round) {
    nn::Vec mu(5), lv(5);
    for (int i = 0; i < 5; ++i) {
      mu(i) = rng.normal() * 3;
      lv(i) = rng.normal() * 2;
    }
    CHECK(kl_loss(mu, lv) >= -1e-12);
  }
}

TEST_CASE("recon_loss masked positions and values") {
  // All positions masked out: zero loss regardless of logits.
  nn::Mat logits(3, 4);
  logits.setRandom();
  Eigen::VectorXi targets(3);
  targets << 1, 2, 3;
  std::vector<std::uint8_t> none = {0, 0, 0};
  CHECK(recon_loss(logits, targets, none) == 0.0);

  // One-entry vocabulary: softmax prob 1 on the true id, zero loss.
  nn::Mat single(1, 1);
  single << 3.7;
  Eigen::VectorXi t1(1);
  t1 << 0;
  std::vector<std::uint8_t> all = {1};
  CHECK(recon_loss(single, t1, all) == doctest::Approx(0.0).epsilon(1e-15));

  // Two equal logits: prob 0.5, loss ln 2.
  nn::Mat even(1, 2);
  even << 1.0, 1.0;
  CHECK(recon_loss(even, t1, all) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("recon_loss is inert to unmasked-position perturbations") {
  Rng rng(5);
  nn::Mat logits(4, 5);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits(i) = rng.normal();
  Eigen::VectorXi targets(4);
  targets << 2, 0, 3, 1;
  std::vector<std::uint8_t> mask = {1, 0, 1, 0};
  double before = recon_loss(logits, targets, mask);
  Eigen::VectorXi perturbed = targets;
  perturbed(1) = 4;
  perturbed(3) = 0;
  CHECK(recon_loss(logits, perturbed, mask) == before);
  nn::Mat logits2 = logits;
  logits2.row(1).setConstant(99.0);
  CHECK(recon_loss(logits2, targets, mask) == before);
}

TEST_CASE("vae_total_loss composition") {
  CHECK(vae_total_loss(2.0, 0.5, 0.01) == doctest::Approx(2.005).epsilon(1e-15));
  CHECK(vae_total_loss(1.7, 123.0, 0.0) == 1.7);
  CHECK(vae_total_loss(1.7, 0.0, 0.3) == 1.7);
}

TEST_CASE("eval encode is deterministic with z = mu") {
  TinyData data = make_tiny_data(1);
  VaeConfig config = small_config();
  Rng rng(1);
  VaeModel model(data.vocab.node_size(), data.vocab.subtree_size(), config, rng);
  const auto& sample = data.samples[0];
  LatentCode a = model.encode(*sample.enc, sample.weights, false, nullptr);
  LatentCode b = model.encode(*sample.enc, sample.weights, false, nullptr);
  CHECK((a.mu - b.mu).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.z - a.mu).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.eps.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("training-mode encode is reproducible under the same noise") {
  TinyData data = make_tiny_data(1);
  VaeConfig config = small_config();
  Rng rng(2);
  VaeModel model(data.vocab.node_size(), data.vocab.subtree_size(), config, rng);
  Rng noise_rng(3);
  VaeNoise noise = model.make_noise(noise_rng);
  const auto& sample = data.samples[0];
  LatentCode a = model.encode(*sample.enc, sample.weights, true, &noise);
  LatentCode b = model.encode(*sample.enc, sample.weights, true, &noise);
  CHECK((a.z - b.z).cwiseAbs().maxCoeff() == 0.0);
  nn::Vec expect = reparameterize(a.mu, a.log_var, noise.eps);
  CHECK((a.z - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero attention weights erase sequence identity") {
  TinyData data = make_tiny_data(1);
  VaeConfig config = small_config();
  Rng rng(4);
  VaeModel model(data.vocab.node_size(), data.vocab.subtree_size(), config, rng);
  // Samples 1 and 2 come from different programs with equally many anchors.
  REQUIRE(data.samples[1].enc->len == data.samples[2].enc->len);
  std::vector<double> zeros_a(data.samples[1].weights.size(), 0.0);
  std::vector<double> zeros_b(data.samples[2].weights.size(), 0.0);
  LatentCode a = model.encode(*data.samples[1].enc, zeros_a, false, nullptr);
  LatentCode b = model.encode(*data.samples[2].enc, zeros_b, false, nullptr);
  // With multiplicative weights all zero the encoder sees identical input.
  CHECK((a.mu - b.mu).cwiseAbs().maxCoeff() < 1e-12);
  // Same sequence, zero weights vs real weights: different mu.
  LatentCode c = model.encode(*data.samples[1].enc, data.samples[1].weights, false, nullptr);
  CHECK((a.mu - c.mu).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("misaligned attention weights are rejected") {
  TinyData data = make_tiny_data(1);
  VaeConfig config = small_config();
  Rng rng(5);
  VaeModel model(data.vocab.node_size(), data.vocab.subtree_size(), config, rng);
  std::vector<double> short_weights = {1.0};
  if (data.samples[0].enc->len > 1)
    CHECK_THROWS_AS(model.encode(*data.samples[0].enc, short_weights, false, nullptr),
                    ValidationError);
}

TEST_CASE("full VAE gradient check with frozen noise") {
  // Central differences at the pinned 1e-5 step have an fp64 noise floor, so
  // the check point uses long well-stimulated sequences where every gradient
  // coordinate stays clear of it.
  const char* programs[] = {
      "{ int s = 0; int i = 0; while (i < 9) { s = s + i; i = i + 1; } if (s > 5) { s = 0; } f(s); }",
      "{ int a = 1; int b = 2; if (a > b) { a = b; } for (int j = 0; j < 4; j = j + 1) { a = a + j; } g(a, b); }",
  };
  std::vector<pattern::SubtreeSequence> seqs;
  for (const char* p : programs) seqs.push_back(pattern::extract_subtrees(minilang::parse(p)));
  pattern::Vocab vocab = pattern::build_vocab(seqs);
  std::vector<pattern::EncodedSequence> encs;
  for (const auto& s : seqs) encs.push_back(pattern::encode_sequence(s, vocab, 12, 30));
  std::vector<VaeSample> samples;
  for (auto& enc : encs) {
    VaeSample sample;
    sample.enc = &enc;
    sample.weights.assign(enc.mask.size(), 1.0);
    sample.targets = Eigen::VectorXi::Zero(enc.len);
    sample.important.assign(static_cast<std::size_t>(enc.len), 0);
    for (int s = 0; s < enc.len; s += 2) {
      sample.targets(s) = enc.subtree_ids(s);
      sample.important[static_cast<std::size_t>(s)] = 1;
    }
    samples.push_back(std::move(sample));
  }
  VaeConfig config;
  config.node_embed_dim = 4;
  config.node_hidden = 4;
  config.subtree_embed_dim = 4;
  config.combiner_dim = 4;
  config.seq_hidden = 4;
  config.latent_dim = 4;
  Rng rng(26);
  VaeModel model(vocab.node_size(), vocab.subtree_size(), config, rng);

  Rng noise_rng(11);
  std::vector<VaeNoise> noise;
  noise.push_back(model.make_noise(noise_rng));
  noise.push_back(model.make_noise(noise_rng));

  auto loss_fn = [&] {
    double total = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i)
      total += model.loss(samples[i], true, &noise[i]);
    return total / 2.0;
  };

  for (nn::Parameter* p : model.params()) p->zero_grad();
  for (std::size_t i = 0; i < samples.size(); ++i)
    model.loss_backward(samples[i], true, &noise[i], 0.5);

  auto params = model.params();
  Rng check_rng(8);
  double err = nn::grad_check(loss_fn, params, check_rng, 20);
  CHECK(err < 1e-4);
}

TEST_CASE("train_vae rejects incorrect-labeled input") {
  TinyData data = make_tiny_data(1);
  data.labels[1] = 0;
  VaeConfig config = small_config();
  CHECK_THROWS_AS(train_vae(data.samples, data.labels, data.vocab.node_size(),
                            data.vocab.subtree_size(), config),
                  ValidationError);
}

TEST_CASE("training loss decreases and is seed-deterministic") {
  TinyData data = make_tiny_data(8);  // 24 sequences
  VaeConfig config = small_config();
  config.learning_rate = 0.01;  // desk-size net: the default rate barely moves in 6 epochs
  config.epochs = 6;
  config.patience = 6;
  VaeHistory h1, h2;
  train_vae(data.samples, data.labels, data.vocab.node_size(), data.vocab.subtree_size(), config,
            &h1);
  train_vae(data.samples, data.labels, data.vocab.node_size(), data.vocab.subtree_size(), config,
            &h2);
  REQUIRE(h1.train_loss.size() >= 5);
  CHECK(h1.train_loss[4] < h1.train_loss[0]);
  REQUIRE(h1.train_loss.size() == h2.train_loss.size());
  for (std::size_t e = 0; e < h1.train_loss.size(); ++e)
    CHECK(h1.train_loss[e] == h2.train_loss[e]);
  CHECK(h1.val_masked_accuracy == h2.val_masked_accuracy);
}

TEST_CASE("predict_representative respects the threshold and trains toward targets") {
  TinyData data = make_tiny_data(10);
  VaeConfig config = small_config();
  config.learning_rate = 0.01;
  config.epochs = 40;
  config.patience = 40;
  VaeModel model = train_vae(data.samples, data.labels, data.vocab.node_size(),
                             data.vocab.subtree_size(), config);

  // No high-attention positions: empty result.
  std::vector<double> low(data.samples[0].weights.size(), 0.05);
  CHECK(model.predict_representative(*data.samples[0].enc, low, 0.2).empty());

  // Predictions exclude padding/unknown ids.
  auto preds = model.predict_representative(*data.samples[0].enc, data.samples[0].weights, 0.2);
  CHECK(!preds.empty());
  for (const auto& [slot, id] : preds) CHECK(id >= 2);

  // Self-consistency on training data: the trained decoder recovers a
  // sizeable share of its own targets.
  std::size_t hits = 0, total = 0;
  for (const auto& sample : data.samples) {
    auto p = model.predict_representative(*sample.enc, sample.weights, 0.2);
    for (const auto& [slot, id] : p) {
      ++total;
      hits += id == sample.targets(slot) ? 1 : 0;
    }
  }
  REQUIRE(total > 0);
  CHECK(static_cast<double>(hits) / static_cast<double>(total) >= 0.5);
}

TEST_CASE("untrained model refuses predictions") {
  TinyData data = make_tiny_data(1);
  VaeConfig config = small_config();
  Rng rng(9);
  VaeModel model(data.vocab.node_size(), data.vocab.subtree_size(), config, rng);
  CHECK_THROWS_AS(
      model.predict_representative(*data.samples[0].enc, data.samples[0].weights, 0.2),
      ValidationError);
}

TEST_CASE("model save/load round-trips") {
  TinyData data = make_tiny_data(1);
  VaeConfig config = small_config();
  Rng rng(10);
  VaeModel model(data.vocab.node_size(), data.vocab.subtree_size(), config, rng);
  LatentCode before = model.encode(*data.samples[0].enc, data.samples[0].weights, false, nullptr);
  model.save("t_vae.ckpt");
  Rng rng2(11);
  VaeModel loaded(data.vocab.node_size(), data.vocab.subtree_size(), config, rng2);
  loaded.load("t_vae.ckpt");
  LatentCode after = loaded.encode(*data.samples[0].enc, data.samples[0].weights, false, nullptr);
  CHECK((before.mu - after.mu).cwiseAbs().maxCoeff() == 0.0);
  CHECK(loaded.trained());
  std::remove("t_vae.ckpt");
}
