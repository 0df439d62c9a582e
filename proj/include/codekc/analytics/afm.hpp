#pragma once

#include <span>
#include <string>
#include <vector>

#include "codekc/nn/ops.hpp"

namespace codekc::analytics {

// One first-attempt observation: outcome plus the exercised KCs with the
// student's prior opportunity counts T_ik.
struct AfmObservation {
  bool correct = false;
  std::vector<std::pair<int, int>> kcs;  // (kc index, prior opportunity count)
};

struct AfmOptions {
  double l2 = 1e-4;
  int max_iter = 5000;
  double tol = 1e-6;  // gradient max-norm
};

struct AfmFit {
  double intercept = 0.0;
  std::vector<double> easiness;       // beta_k
  std::vector<double> learning_rate;  // gamma_k
  double log_likelihood = 0.0;        // unpenalized, at the fitted parameters
  int n_obs = 0;
  int n_params = 0;
  double aic = 0.0;   // 2p - 2 lnL
  double bic = 0.0;   // p ln n - 2 lnL
  double rmse = 0.0;  // fitted probabilities vs binary outcomes
  // Penalized objective after each accepted line-search step; non-decreasing.
  std::vector<double> objective_trace;
};

// logit P(correct) = alpha + sum_{k in obs} (beta_k + gamma_k * T_ik),
// fit by gradient ascent with backtracking line search on the L2-penalized
// log-likelihood.
AfmFit fit_afm(std::span<const AfmObservation> observations, int n_kcs, const AfmOptions& opts = {});

void write_afm_csv(const std::string& path, std::span<const std::pair<std::string, AfmFit>> fits);

}  // namespace codekc::analytics
