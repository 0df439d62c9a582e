#include "codekc/analytics/curves.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "codekc/errors.hpp"

namespace codekc::analytics {

const char* curve_category_name(CurveCategory category) {
  switch (category) {
    case CurveCategory::GoodLearning:
      return "GoodLearning";
    case CurveCategory::StillLearning:
      return "StillLearning";
    case CurveCategory::NoLearning:
      return "NoLearning";
    case CurveCategory::Unclassifiable:
      return "Unclassifiable";
  }
  return "?";
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::vector<LearningCurve> build_learning_curves(std::span<const kc::KcOutcome> outcomes,
                                                 const corpus::Corpus& corpus) {
  // Encounter order of first attempts per student (corpus file order).
  std::map<std::string, std::vector<std::string>> encounter_order;
  for (const corpus::Submission& s : corpus.submissions)
    if (s.attempt == 1) encounter_order[s.student_id].push_back(s.problem_id);

  // First-attempt outcomes grouped by KC, then (student, problem).
  std::map<int, std::map<std::string, std::map<std::string, bool>>> exercised;  // kc -> student -> problem -> any incorrect
  for (const kc::KcOutcome& o : outcomes) {
    if (o.submission.attempt != 1) continue;
    bool& incorrect = exercised[o.kc_id][o.submission.student_id][o.submission.problem_id];
    if (o.status == kc::KcStatus::Incorrect) incorrect = true;
  }

  std::vector<LearningCurve> curves;
  for (const auto& [kc_id, by_student] : exercised) {
    // Opportunity index = rank of the problem in the student's encounter
    // order, restricted to problems exercising this KC.
    std::map<int, std::pair<int, int>> counts;  // n -> (errors, students)
    for (const auto& [student, problems] : by_student) {
      auto order_it = encounter_order.find(student);
      if (order_it == encounter_order.end()) continue;
      int n = 0;
      for (const std::string& problem : order_it->second) {
        auto p_it = problems.find(problem);
        if (p_it == problems.end()) continue;
        ++n;
        auto& slot = counts[n];
        slot.second += 1;
        if (p_it->second) slot.first += 1;
      }
    }
    int total_students = static_cast<int>(by_student.size());

    LearningCurve curve;
    curve.kc_id = kc_id;
    for (const auto& [n, slot] : counts) {
      CurvePoint point;
      point.opportunity = n;
      point.n_students = slot.second;
      point.error_rate = slot.second == 0 ? 0.0
                                          : static_cast<double>(slot.first) /
                                                static_cast<double>(slot.second);
      point.coverage =
          total_students == 0 ? 0.0 : static_cast<double>(slot.second) / static_cast<double>(total_students);
      curve.points.push_back(point);
    }
    std::sort(curve.points.begin(), curve.points.end(),
              [](const CurvePoint& a, const CurvePoint& b) { return a.opportunity < b.opportunity; });
    curve.category = classify_curve(curve);
    curves.push_back(std::move(curve));
  }
  return curves;
}

CurveCategory classify_curve(const LearningCurve& curve, const CurveClassifyOptions& opts) {
  std::vector<const CurvePoint*> covered;
  for (const CurvePoint& p : curve.points)
    if (p.n_students >= opts.min_students) covered.push_back(&p);
  if (static_cast<int>(covered.size()) < opts.min_points) return CurveCategory::Unclassifiable;

  // Least-squares slope of error rate over opportunity.
  double mx = 0.0, my = 0.0;
  for (const CurvePoint* p : covered) {
    mx += p->opportunity;
    my += p->error_rate;
  }
  mx /= static_cast<double>(covered.size());
  my /= static_cast<double>(covered.size());
  double sxy = 0.0, sxx = 0.0;
  for (const CurvePoint* p : covered) {
    sxy += (p->opportunity - mx) * (p->error_rate - my);
    sxx += (p->opportunity - mx) * (p->opportunity - mx);
  }
  double slope = sxx == 0.0 ? 0.0 : sxy / sxx;

  std::size_t third = std::max<std::size_t>(1, covered.size() / 3);
  double first_mean = 0.0, last_mean = 0.0;
  for (std::size_t i = 0; i < third; ++i) {
    first_mean += covered[i]->error_rate;
    last_mean += covered[covered.size() - 1 - i]->error_rate;
  }
  first_mean /= static_cast<double>(third);
  last_mean /= static_cast<double>(third);

  if (slope <= -opts.slope_eps && last_mean < first_mean) return CurveCategory::GoodLearning;
  if (slope > -opts.slope_eps) return CurveCategory::NoLearning;
  return CurveCategory::StillLearning;
}

void write_curves_csv(const std::string& path, std::span<const LearningCurve> curves) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write curves file: " + path);
  out << "kc_id,opportunity,error_rate,n_students,coverage,category\n";
  for (const LearningCurve& curve : curves)
    for (const CurvePoint& p : curve.points)
      out << curve.kc_id << "," << p.opportunity << "," << fmt(p.error_rate) << "," << p.n_students
          << "," << fmt(p.coverage) << "," << curve_category_name(curve.category) << "\n";
}

void write_curves_svg(const std::string& path, std::span<const LearningCurve> curves) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write curves svg: " + path);
  const int width = 860, height = 460, margin = 50;
  int max_opp = 1;
  for (const LearningCurve& c : curves)
    for (const CurvePoint& p : c.points) max_opp = std::max(max_opp, p.opportunity);
  auto sx = [&](double n) {
    return margin + (n - 1.0) / std::max(1, max_opp - 1) * (width - 2 * margin);
  };
  auto sy = [&](double e) { return height - margin - e * (height - 2 * margin); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
  int idx = 0;
  for (const LearningCurve& curve : curves) {
    int hue = (idx * 47) % 360;
    out << "<polyline fill=\"none\" stroke=\"hsl(" << hue << ",70%,45%)\" points=\"";
    for (const CurvePoint& p : curve.points)
      out << fmt(sx(p.opportunity)) << "," << fmt(sy(p.error_rate)) << " ";
    out << "\"/>\n";
    for (const CurvePoint& p : curve.points) {
      out << "<circle cx=\"" << fmt(sx(p.opportunity)) << "\" cy=\"" << fmt(sy(p.error_rate))
          << "\" r=\"4\" fill=\"hsl(" << hue << ",70%,45%)\" fill-opacity=\"" << fmt(p.coverage)
          << "\"/>\n";
    }
    ++idx;
  }
  out << "</svg>\n";
}

}  // namespace codekc::analytics
