#include "codekc/analytics/afm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "codekc/errors.hpp"

namespace codekc::analytics {

namespace {

using nn::Vec;

// Parameter layout: [alpha, beta_0..K-1, gamma_0..K-1].
double predict_logit(const AfmObservation& obs, const Vec& theta, int n_kcs) {
  double logit = theta(0);
  for (const auto& [k, t] : obs.kcs) logit += theta(1 + k) + theta(1 + n_kcs + k) * t;
  return logit;
}

double penalized_loglik(std::span<const AfmObservation> observations, const Vec& theta, int n_kcs,
                        double l2) {
  double ll = 0.0;
  for (const AfmObservation& obs : observations) {
    double logit = predict_logit(obs, theta, n_kcs);
    // log sigma(z) = -log(1+e^-z); log(1-sigma(z)) = -z - log(1+e^-z)
    double log_p = logit >= 0 ? -std::log1p(std::exp(-logit)) : logit - std::log1p(std::exp(logit));
    double log_q = log_p - logit;
    ll += obs.correct ? log_p : log_q;
  }
  return ll - l2 * theta.squaredNorm();
}

Vec gradient(std::span<const AfmObservation> observations, const Vec& theta, int n_kcs, double l2) {
  Vec g = Vec::Zero(theta.size());
  for (const AfmObservation& obs : observations) {
    double p = nn::sigmoid(predict_logit(obs, theta, n_kcs));
    double resid = (obs.correct ? 1.0 : 0.0) - p;
    g(0) += resid;
    for (const auto& [k, t] : obs.kcs) {
      g(1 + k) += resid;
      g(1 + n_kcs + k) += resid * t;
    }
  }
  g -= 2.0 * l2 * theta;
  return g;
}

}  // namespace

AfmFit fit_afm(std::span<const AfmObservation> observations, int n_kcs, const AfmOptions& opts) {
  if (observations.empty()) throw ValidationError("fit_afm: no observations");
  if (n_kcs < 1) throw ValidationError("fit_afm: need at least one KC");
  for (const AfmObservation& obs : observations)
    for (const auto& [k, t] : obs.kcs) {
      if (k < 0 || k >= n_kcs) throw ValidationError("fit_afm: KC index out of range");
      if (t < 0) throw ValidationError("fit_afm: negative opportunity count");
    }

  Vec theta = Vec::Zero(1 + 2 * n_kcs);
  AfmFit fit;
  double obj = penalized_loglik(observations, theta, n_kcs, opts.l2);
  fit.objective_trace.push_back(obj);

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    Vec g = gradient(observations, theta, n_kcs, opts.l2);
    double gnorm = g.cwiseAbs().maxCoeff();
    if (gnorm < opts.tol) break;
    // Backtracking line search (Armijo) along the gradient.
    double step = 1.0;
    double g2 = g.squaredNorm();
    bool accepted = false;
    for (int half = 0; half < 60; ++half) {
      Vec candidate = theta + step * g;
      double cand_obj = penalized_loglik(observations, candidate, n_kcs, opts.l2);
      if (cand_obj >= obj + 1e-4 * step * g2) {
        theta = candidate;
        obj = cand_obj;
        fit.objective_trace.push_back(obj);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no ascent direction at machine precision
  }

  fit.intercept = theta(0);
  fit.easiness.assign(theta.data() + 1, theta.data() + 1 + n_kcs);
  fit.learning_rate.assign(theta.data() + 1 + n_kcs, theta.data() + 1 + 2 * n_kcs);
  fit.n_obs = static_cast<int>(observations.size());
  fit.n_params = 1 + 2 * n_kcs;

  double ll = 0.0, sq = 0.0;
  for (const AfmObservation& obs : observations) {
    double logit = predict_logit(obs, theta, n_kcs);
    double p = nn::sigmoid(logit);
    double log_p = logit >= 0 ? -std::log1p(std::exp(-logit)) : logit - std::log1p(std::exp(logit));
    ll += obs.correct ? log_p : log_p - logit;
    double y = obs.correct ? 1.0 : 0.0;
    sq += (p - y) * (p - y);
  }
  fit.log_likelihood = ll;
  fit.aic = 2.0 * fit.n_params - 2.0 * ll;
  fit.bic = fit.n_params * std::log(static_cast<double>(fit.n_obs)) - 2.0 * ll;
  fit.rmse = std::sqrt(sq / static_cast<double>(fit.n_obs));
  return fit;
}

void write_afm_csv(const std::string& path, std::span<const std::pair<std::string, AfmFit>> fits) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write afm file: " + path);
  out << "model,aic,bic,rmse,loglik,n_params\n";
  char buf[160];
  for (const auto& [name, fit] : fits) {
    std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%.6f,%.6f,%d\n", name.c_str(), fit.aic, fit.bic,
                  fit.rmse, fit.log_likelihood, fit.n_params);
    out << buf;
  }
}

}  // namespace codekc::analytics
