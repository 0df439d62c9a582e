#pragma once

#include <functional>
#include <span>

#include "codekc/nn/optim.hpp"

namespace codekc::nn {

// Central finite differences against already-computed analytic gradients.
// For each parameter, >= n_samples randomly chosen coordinates are perturbed
// by +-step; relative error is |g_a - g_n| / max(1e-8, |g_a| + |g_n|).
// `loss_fn` must recompute the loss from the current parameter values with
// all randomness frozen. Returns the maximum relative error seen.
double grad_check(const std::function<double()>& loss_fn, std::span<Parameter* const> params,
                  Rng& rng, int n_samples = 20, double step = 1e-5);

}  // namespace codekc::nn
