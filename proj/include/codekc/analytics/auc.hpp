#pragma once

#include <span>

namespace codekc::analytics {

// Mann-Whitney AUC: the fraction of (positive, negative) pairs where the
// positive outscores the negative, ties counted half. Computed via midranks.
// Throws ValidationError when either class is empty.
double evaluate_auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace codekc::analytics
