#include "codekc/analytics/auc.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "codekc/errors.hpp"

namespace codekc::analytics {

double evaluate_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("evaluate_auc: size mismatch");
  std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int label : labels) n_pos += label ? 1 : 0;
  std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw ValidationError("evaluate_auc: needs at least one positive and one negative label");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks over tie groups; rank sum of positives gives the U statistic.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double midrank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]]) rank_sum_pos += midrank;
    i = j + 1;
  }
  double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace codekc::analytics
