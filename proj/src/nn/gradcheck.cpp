#include "codekc/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace codekc::nn {

double grad_check(const std::function<double()>& loss_fn, std::span<Parameter* const> params,
                  Rng& rng, int n_samples, double step) {
  double max_rel = 0.0;
  for (Parameter* p : params) {
    Eigen::Index size = p->value.size();
    if (size == 0) continue;
    Eigen::Index first_row = p->pad_row_zero ? 1 : 0;  // padding row carries no gradient
    Eigen::Index usable_rows = p->value.rows() - first_row;
    if (usable_rows <= 0) continue;
    int samples = static_cast<int>(std::min<Eigen::Index>(n_samples, usable_rows * p->value.cols()));
    for (int s = 0; s < samples; ++s) {
      Eigen::Index r = first_row + static_cast<Eigen::Index>(rng.integer(static_cast<std::uint64_t>(usable_rows)));
      Eigen::Index c = static_cast<Eigen::Index>(rng.integer(static_cast<std::uint64_t>(p->value.cols())));
      double saved = p->value(r, c);
      p->value(r, c) = saved + step;
      double up = loss_fn();
      p->value(r, c) = saved - step;
      double down = loss_fn();
      p->value(r, c) = saved;
      double numeric = (up - down) / (2.0 * step);
      double analytic = p->grad(r, c);
      double rel = std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace codekc::nn
