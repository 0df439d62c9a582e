#pragma once

#include <span>
#include <string>
#include <vector>

#include "codekc/corpus.hpp"
#include "codekc/kc.hpp"

namespace codekc::analytics {

enum class CurveCategory { GoodLearning, StillLearning, NoLearning, Unclassifiable };

const char* curve_category_name(CurveCategory category);

struct CurvePoint {
  int opportunity = 1;       // n >= 1, contiguous
  double error_rate = 0.0;   // fraction of students Incorrect at their n-th opportunity
  int n_students = 0;        // students having an n-th opportunity
  double coverage = 0.0;     // n_students / students ever exercising the KC
};

struct LearningCurve {
  int kc_id = 0;
  std::vector<CurvePoint> points;
  CurveCategory category = CurveCategory::Unclassifiable;
};

// Opportunity-based curves over first attempts only: a student's n-th
// distinct problem exercising the KC (in their encounter order) is
// opportunity n. Outcomes from attempts > 1 are ignored.
std::vector<LearningCurve> build_learning_curves(std::span<const kc::KcOutcome> outcomes,
                                                 const corpus::Corpus& corpus);

struct CurveClassifyOptions {
  int min_points = 3;
  int min_students = 5;
  double slope_eps = 0.005;
  double high_err = 0.5;  // retained for configuration compatibility
};

// Restricted to points with enough students: GoodLearning when the fitted
// slope clears -slope_eps and the last third improves on the first third;
// otherwise NoLearning when the slope does not clear it; else StillLearning.
CurveCategory classify_curve(const LearningCurve& curve, const CurveClassifyOptions& opts = {});

void write_curves_csv(const std::string& path, std::span<const LearningCurve> curves);
void write_curves_svg(const std::string& path, std::span<const LearningCurve> curves);

}  // namespace codekc::analytics
