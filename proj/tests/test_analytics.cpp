#include <cmath>
#include <fstream>
#include <set>

#include "codekc/analytics/afm.hpp"
#include "codekc/analytics/auc.hpp"
#include "codekc/analytics/curves.hpp"
#include "codekc/analytics/dkt.hpp"
#include "codekc/errors.hpp"
#include "codekc/rng.hpp"
#include "doctest.h"

using namespace codekc;
using namespace codekc::analytics;

namespace {

// Independent oracle: tie-aware pairwise AUC, O(n^2).
double auc_pair_oracle(std::span<const double> scores, std::span<const int> labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("auc hand examples") {
  std::vector<double> s1 = {0.9, 0.1};
  std::vector<int> l1 = {1, 0};
  CHECK(evaluate_auc(s1, l1) == doctest::Approx(1.0));

  std::vector<double> s2 = {0.4, 0.4, 0.4, 0.4};
  std::vector<int> l2 = {1, 0, 1, 0};
  CHECK(evaluate_auc(s2, l2) == doctest::Approx(0.5));

  std::vector<double> s3 = {0.8, 0.7, 0.3};
  std::vector<int> l3 = {1, 0, 1};
  CHECK(evaluate_auc(s3, l3) == doctest::Approx(0.5));

  std::vector<double> s4 = {0.9, 0.8};
  std::vector<int> l4 = {1, 1};
  CHECK_THROWS_AS(evaluate_auc(s4, l4), ValidationError);
}

TEST_CASE("auc matches the pair-count oracle and is monotone-invariant") {
  Rng rng(31);
  for (int round = 0; round < 20; ++round) {
    std::size_t n = 5 + rng.integer(60);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = std::round(rng.uniform() * 10.0) / 10.0;  // force ties
      labels[i] = rng.integer(2) ? 1 : 0;
      has_pos = has_pos || labels[i] == 1;
      has_neg = has_neg || labels[i] == 0;
    }
    if (!has_pos || !has_neg) continue;
    double a = evaluate_auc(scores, labels);
    CHECK(a == doctest::Approx(auc_pair_oracle(scores, labels)).epsilon(1e-12));

    // Strictly increasing transform leaves AUC unchanged.
    std::vector<double> transformed = scores;
    for (double& x : transformed) x = std::exp(3.0 * x) + 7.0;
    CHECK(evaluate_auc(transformed, labels) == doctest::Approx(a).epsilon(1e-12));
  }
}

TEST_CASE("dkt_encode one-hot layout") {
  DktStep step;
  step.q = 3;
  step.a = 1;
  Vec x = dkt_encode(step, 50, 0, false);
  CHECK(x.size() == 100);
  CHECK(x(3) == 1.0);
  CHECK(x.sum() == 1.0);

  step.a = 0;
  x = dkt_encode(step, 50, 0, false);
  CHECK(x(53) == 1.0);
  CHECK(x.sum() == 1.0);

  step.kc_bits = {0, 1, 0, 1};
  step.a = 1;
  Vec xk = dkt_encode(step, 50, 4, true);
  CHECK(xk.size() == 104);
  CHECK(xk(100) == 0.0);
  CHECK(xk(101) == 1.0);
  CHECK(xk(102) == 0.0);
  CHECK(xk(103) == 1.0);

  step.q = 50;
  CHECK_THROWS_AS(dkt_encode(step, 50, 0, false), ValidationError);
}

TEST_CASE("dkt_encode is injective over (q, a)") {
  std::set<int> hot;
  for (int q = 0; q < 7; ++q)
    for (int a = 0; a < 2; ++a) {
      DktStep step{q, a, {}};
      Vec x = dkt_encode(step, 7, 0, false);
      int idx = -1;
      for (int i = 0; i < x.size(); ++i)
        if (x(i) == 1.0) idx = i;
      CHECK(x.sum() == 1.0);
      CHECK(hot.insert(idx).second);
    }
  CHECK(hot.size() == 14);
}

TEST_CASE("learning curves from outcomes") {
  // Two students, one KC at opportunity 1 with outcomes {Incorrect, Correct}.
  corpus::Corpus corpus;
  for (const char* student : {"s1", "s2"}) {
    corpus::Submission sub;
    sub.student_id = student;
    sub.problem_id = "p1";
    sub.attempt = 1;
    sub.score = student[1] == '2' ? 1.0 : 0.0;
    sub.correct = sub.score == 1.0;
    corpus.submissions.push_back(sub);
  }
  corpus = corpus::Corpus::from_submissions(corpus.submissions, {});

  std::vector<kc::KcOutcome> outcomes = {
      {{"s1", "p1", 1}, 0, kc::KcStatus::Incorrect, kc::KcSource::ErrorPattern},
      {{"s2", "p1", 1}, 0, kc::KcStatus::Correct, kc::KcSource::CorrectPattern},
      // Attempt 2 outcomes are excluded from curves.
      {{"s1", "p1", 2}, 0, kc::KcStatus::Correct, kc::KcSource::CorrectPattern},
  };
  auto curves = build_learning_curves(outcomes, corpus);
  REQUIRE(curves.size() == 1);
  REQUIRE(curves[0].points.size() == 1);
  CHECK(curves[0].points[0].opportunity == 1);
  CHECK(curves[0].points[0].n_students == 2);
  CHECK(curves[0].points[0].error_rate == doctest::Approx(0.5));
  CHECK(curves[0].points[0].coverage == doctest::Approx(1.0));
}

TEST_CASE("curve coverage is non-increasing over opportunities") {
  // Student s1 exercises the KC on 3 problems, s2 on 1.
  corpus::Corpus corpus;
  for (int p = 1; p <= 3; ++p) {
    corpus::Submission sub;
    sub.student_id = "s1";
    sub.problem_id = "p" + std::to_string(p);
    sub.attempt = 1;
    sub.correct = true;
    sub.score = 1.0;
    corpus.submissions.push_back(sub);
  }
  corpus::Submission sub;
  sub.student_id = "s2";
  sub.problem_id = "p1";
  sub.attempt = 1;
  sub.correct = false;
  sub.score = 0.0;
  corpus.submissions.push_back(sub);
  corpus = corpus::Corpus::from_submissions(corpus.submissions, {});

  std::vector<kc::KcOutcome> outcomes;
  for (int p = 1; p <= 3; ++p)
    outcomes.push_back(
        {{"s1", "p" + std::to_string(p), 1}, 0, kc::KcStatus::Correct, kc::KcSource::CorrectPattern});
  outcomes.push_back({{"s2", "p1", 1}, 0, kc::KcStatus::Incorrect, kc::KcSource::ErrorPattern});

  auto curves = build_learning_curves(outcomes, corpus);
  REQUIRE(curves.size() == 1);
  REQUIRE(curves[0].points.size() == 3);
  for (std::size_t i = 1; i < curves[0].points.size(); ++i) {
    CHECK(curves[0].points[i].n_students <= curves[0].points[i - 1].n_students);
    CHECK(curves[0].points[i].opportunity == curves[0].points[i - 1].opportunity + 1);
  }
}

TEST_CASE("classify_curve categories") {
  auto curve_with = [](std::vector<double> errors, int students) {
    LearningCurve curve;
    for (std::size_t i = 0; i < errors.size(); ++i)
      curve.points.push_back({static_cast<int>(i + 1), errors[i], students, 1.0});
    return curve;
  };
  CurveClassifyOptions opts;
  CHECK(classify_curve(curve_with({0.8, 0.6, 0.4, 0.2}, 10), opts) == CurveCategory::GoodLearning);
  CHECK(classify_curve(curve_with({0.7, 0.72, 0.69, 0.71}, 10), opts) == CurveCategory::NoLearning);
  CHECK(classify_curve(curve_with({0.8, 0.6}, 10), opts) == CurveCategory::Unclassifiable);
  // Too few students on every point: unclassifiable.
  CHECK(classify_curve(curve_with({0.8, 0.6, 0.4, 0.2}, 2), opts) == CurveCategory::Unclassifiable);
  // Declining slope driven by the middle, but the last third does not improve
  // on the first: still learning.
  CHECK(classify_curve(curve_with({0.3, 0.35, 0.3, 1.0, 0.9, 0.1, 0.3, 0.35, 0.4}, 10), opts) ==
        CurveCategory::StillLearning);
}

TEST_CASE("afm identities hold exactly") {
  Rng rng(41);
  std::vector<AfmObservation> observations;
  for (int i = 0; i < 60; ++i) {
    AfmObservation obs;
    obs.correct = rng.integer(2) == 1;
    obs.kcs.push_back({static_cast<int>(rng.integer(3)), static_cast<int>(rng.integer(5))});
    observations.push_back(obs);
  }
  AfmFit fit = fit_afm(observations, 3);
  CHECK(fit.n_params == 7);
  CHECK(fit.aic == doctest::Approx(2.0 * fit.n_params - 2.0 * fit.log_likelihood).epsilon(1e-15));
  CHECK(fit.bic ==
        doctest::Approx(fit.n_params * std::log(static_cast<double>(fit.n_obs)) -
                        2.0 * fit.log_likelihood)
            .epsilon(1e-15));
  CHECK(fit.rmse >= 0.0);
  CHECK(fit.rmse <= 1.0);
  // Direct-formula spot check: p=3, logL=-10, n=e^2.
  CHECK(2.0 * 3 - 2.0 * (-10.0) == 26.0);
  CHECK(3.0 * std::log(std::exp(2.0)) - 2.0 * (-10.0) == doctest::Approx(26.0).epsilon(1e-12));
}

TEST_CASE("afm objective trace is non-decreasing") {
  Rng rng(43);
  std::vector<AfmObservation> observations;
  for (int i = 0; i < 100; ++i) {
    AfmObservation obs;
    obs.correct = rng.uniform() < 0.6;
    obs.kcs.push_back({static_cast<int>(rng.integer(4)), static_cast<int>(rng.integer(6))});
    observations.push_back(obs);
  }
  AfmFit fit = fit_afm(observations, 4);
  for (std::size_t i = 1; i < fit.objective_trace.size(); ++i)
    CHECK(fit.objective_trace[i] >= fit.objective_trace[i - 1] - 1e-9);
}

TEST_CASE("afm recovers planted learning rates") {
  // 50 students x 20 opportunities over K=3 KCs with known parameters.
  Rng rng(47);
  const double alpha = -0.2;
  const std::vector<double> beta = {0.3, -0.4, 0.1};
  const std::vector<double> gamma = {0.25, 0.4, 0.15};
  std::vector<AfmObservation> observations;
  for (int student = 0; student < 50; ++student) {
    std::vector<int> opportunities(3, 0);
    for (int step = 0; step < 20; ++step) {
      int k = static_cast<int>(rng.integer(3));
      AfmObservation obs;
      int t = opportunities[static_cast<std::size_t>(k)]++;
      obs.kcs.push_back({k, t});
      double logit = alpha + beta[static_cast<std::size_t>(k)] +
                     gamma[static_cast<std::size_t>(k)] * t;
      obs.correct = rng.uniform() < 1.0 / (1.0 + std::exp(-logit));
      observations.push_back(obs);
    }
  }
  AfmFit fit = fit_afm(observations, 3);
  for (int k = 0; k < 3; ++k) {
    double diff = std::abs(fit.learning_rate[static_cast<std::size_t>(k)] -
                           gamma[static_cast<std::size_t>(k)]);
    CHECK(diff <= 0.15);
  }
}

TEST_CASE("afm rejects empty input") {
  std::vector<AfmObservation> none;
  CHECK_THROWS_AS(fit_afm(none, 1), ValidationError);
}

namespace {

// Deterministic-learnability corpus: student u masters problems with
// difficulty below their (monotonically growing) skill; the outcome is a
// deterministic function of (skill at time t, problem).
std::vector<DktSequence> learnable_corpus(int n_students, int n_problems, int steps,
                                          std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DktSequence> sequences;
  for (int u = 0; u < n_students; ++u) {
    DktSequence seq;
    seq.student_id = "s" + std::to_string(u);
    double skill = rng.uniform() * 0.3;
    double growth = 0.02 + rng.uniform() * 0.05;
    for (int t = 0; t < steps; ++t) {
      int q = static_cast<int>(rng.integer(static_cast<std::uint64_t>(n_problems)));
      double difficulty = static_cast<double>(q) / n_problems;
      DktStep step;
      step.q = q;
      step.a = skill >= difficulty ? 1 : 0;
      seq.steps.push_back(step);
      skill += growth;
    }
    sequences.push_back(std::move(seq));
  }
  return sequences;
}

}  // namespace

TEST_CASE("dkt learns a deterministic-learnability corpus") {
  auto all = learnable_corpus(60, 8, 20, 51);
  std::vector<DktSequence> train(all.begin(), all.begin() + 40);
  std::vector<DktSequence> val(all.begin() + 40, all.begin() + 50);
  std::vector<DktSequence> test(all.begin() + 50, all.end());
  DktConfig config;
  config.hidden = 32;
  config.epochs = 40;
  config.patience = 10;
  config.batch_size = 8;
  config.seed = 3;
  DktModel model = train_dkt(train, val, 8, 0, false, config);
  CHECK(dkt_auc(model, test) >= 0.9);
}

TEST_CASE("dkt training is deterministic under seed") {
  auto all = learnable_corpus(20, 5, 10, 53);
  std::vector<DktSequence> train(all.begin(), all.begin() + 15);
  std::vector<DktSequence> val(all.begin() + 15, all.end());
  DktConfig config;
  config.hidden = 16;
  config.epochs = 5;
  config.patience = 5;
  config.seed = 9;
  DktHistory h1, h2;
  train_dkt(train, val, 5, 0, false, config, &h1);
  train_dkt(train, val, 5, 0, false, config, &h2);
  REQUIRE(h1.train_loss.size() == h2.train_loss.size());
  for (std::size_t e = 0; e < h1.train_loss.size(); ++e) {
    CHECK(h1.train_loss[e] == h2.train_loss[e]);
    CHECK(h1.val_auc[e] == h2.val_auc[e]);
  }
}

TEST_CASE("dkt skips short sequences and rejects all-short input") {
  DktSequence short_seq;
  short_seq.student_id = "s";
  short_seq.steps.push_back({0, 1, {}});
  std::vector<DktSequence> only_short = {short_seq};
  DktConfig config;
  config.hidden = 8;
  config.epochs = 1;
  CHECK_THROWS_AS(train_dkt(only_short, {}, 3, 0, false, config), ValidationError);
}

TEST_CASE("dkt loss gradient matches finite differences") {
  auto all = learnable_corpus(2, 4, 6, 57);
  DktConfig config;
  config.hidden = 6;
  config.dropout = 0.0;  // frozen: no stochastic masks in this check
  Rng rng(1);
  DktModel model(4, 0, false, config, rng);

  auto loss_fn = [&] {
    double total = 0.0;
    for (const DktSequence& seq : all) {
      Mat probs = model.forward_probs(seq);
      for (std::size_t t = 0; t + 1 < seq.steps.size(); ++t) {
        double p = std::clamp(probs(static_cast<Eigen::Index>(t), seq.steps[t + 1].q), 1e-12,
                              1.0 - 1e-12);
        double a = seq.steps[t + 1].a;
        total += -(a * std::log(p) + (1 - a) * std::log(1 - p));
      }
    }
    return total;
  };

  for (nn::Parameter* p : model.params()) p->zero_grad();
  Rng drop_rng(2);
  for (const DktSequence& seq : all) model.loss_backward(seq, 1.0, drop_rng);
  auto params = model.params();
  Rng check_rng(3);
  CHECK(nn::grad_check(loss_fn, params, check_rng, 15) < 1e-5);
}
