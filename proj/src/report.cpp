#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "codekc/errors.hpp"
#include "codekc/kc.hpp"
#include "codekc/minilang.hpp"
#include "codekc/pattern.hpp"
#include "codekc/pipeline.hpp"
#include "json.hpp"

namespace codekc::pipeline::detail {

namespace {

using nlohmann::json;

std::string fmt2(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw StageError("missing artifact: " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

void run_report(const PipelineConfig& config) {
  corpus::Corpus retained = corpus::load_corpus(artifact_path(config, "retained.jsonl"), false);

  json kcs;
  {
    std::ifstream in(artifact_path(config, "kcs.json"));
    if (!in) throw StageError("missing artifact: " + artifact_path(config, "kcs.json").string());
    in >> kcs;
  }

  // Recompute KC stats from the outcomes artifact.
  std::vector<kc::KcOutcome> outcomes;
  for (const json& j : [&] {
         std::ifstream in(artifact_path(config, "outcomes.jsonl"));
         if (!in)
           throw StageError("missing artifact: " + artifact_path(config, "outcomes.jsonl").string());
         std::vector<json> rows;
         std::string line;
         while (std::getline(in, line))
           if (!line.empty()) rows.push_back(json::parse(line));
         return rows;
       }()) {
    kc::KcOutcome o;
    const json& ref = j.at("submission");
    o.submission = {ref.at("student_id").get<std::string>(), ref.at("problem_id").get<std::string>(),
                    ref.at("attempt").get<int>()};
    o.kc_id = j.at("kc_id").get<int>();
    o.status = j.at("status").get<std::string>() == "correct" ? kc::KcStatus::Correct
                                                              : kc::KcStatus::Incorrect;
    outcomes.push_back(std::move(o));
  }
  kc::KcStats stats = kc::kc_stats(outcomes);

  auto curve_rows = read_csv(artifact_path(config, "curves.csv"));
  std::map<int, std::string> curve_category;  // kc -> category
  for (std::size_t i = 1; i < curve_rows.size(); ++i)
    if (curve_rows[i].size() >= 6) curve_category[std::stoi(curve_rows[i][0])] = curve_rows[i][5];
  std::map<std::string, int> category_counts;
  for (const auto& [kc_id, category] : curve_category) category_counts[category] += 1;

  auto afm_rows = read_csv(artifact_path(config, "afm.csv"));

  json dkt;
  {
    std::ifstream in(artifact_path(config, "dkt_metrics.json"));
    if (!in)
      throw StageError("missing artifact: " + artifact_path(config, "dkt_metrics.json").string());
    in >> dkt;
  }

  std::ofstream out(artifact_path(config, "report.md"));
  out << "# Pattern-based KC discovery report\n\n";

  out << "## Corpus\n\n";
  int n_correct = 0;
  for (const corpus::Submission& s : retained.submissions) n_correct += s.correct ? 1 : 0;
  out << "- submissions: " << retained.submissions.size() << " (" << n_correct << " correct, "
      << retained.submissions.size() - n_correct << " incorrect)\n";
  out << "- students: " << retained.students.size() << "\n";
  out << "- problems: " << retained.problems.size() << "\n";
  out << "- discovered KCs: " << kcs.size() << "\n\n";

  out << "## KC statistics\n\n";
  out << "| Statistic | Mean (std) |\n|---|---|\n";
  out << "| KCs per problem over all student submissions | " << fmt2(stats.kcs_per_problem_mean)
      << " (" << fmt2(stats.kcs_per_problem_std) << ") |\n";
  out << "| KCs per student submission | " << fmt2(stats.kcs_per_submission_mean) << " ("
      << fmt2(stats.kcs_per_submission_std) << ") |\n";
  out << "| Problems per KC | " << fmt2(stats.problems_per_kc_mean) << " ("
      << fmt2(stats.problems_per_kc_std) << ") |\n\n";

  out << "## Learning curve categories\n\n";
  out << "| Category | KCs |\n|---|---|\n";
  for (const char* name : {"GoodLearning", "StillLearning", "NoLearning", "Unclassifiable"}) {
    auto it = category_counts.find(name);
    out << "| " << name << " | " << (it == category_counts.end() ? 0 : it->second) << " |\n";
  }
  out << "\n";

  out << "## AFM model comparison\n\n";
  out << "| Model | AIC | BIC | RMSE |\n|---|---|---|---|\n";
  for (std::size_t i = 1; i < afm_rows.size(); ++i) {
    if (afm_rows[i].size() < 4) continue;
    out << "| " << afm_rows[i][0] << " | " << afm_rows[i][1] << " | " << afm_rows[i][2] << " | "
        << afm_rows[i][3] << " |\n";
  }
  out << "\n";

  out << "## Knowledge tracing (AUC)\n\n";
  out << "| Model | A1 | A2 | A3 | A4 | A5 | All |\n|---|---|---|---|---|---|---|\n";
  for (const json& entry : dkt) {
    out << "| " << entry.at("model").get<std::string>() << " | ";
    const json& per = entry.at("per_assignment_auc");
    for (int a = 1; a <= 5; ++a) {
      std::string key = "A" + std::to_string(a);
      if (per.contains(key) && !per.at(key).is_null())
        out << fmt4(per.at(key).get<double>());
      else
        out << "-";
      out << " | ";
    }
    out << fmt4(entry.at("overall_auc").get<double>()) << " |\n";
  }
  out << "\n";

  out << "## KC catalog\n\n";
  for (const json& cluster : kcs) {
    out << "### KC " << cluster.at("kc_id").get<int>() << "\n\n";
    out << "- members: " << cluster.at("member_count").get<int>() << "\n";
    auto it = curve_category.find(cluster.at("kc_id").get<int>());
    out << "- curve: " << (it == curve_category.end() ? "Unclassifiable" : it->second) << "\n";
    out << "- representative pattern:\n\n```\n";
    try {
      minilang::AstNode tree = pattern::parse_canon(cluster.at("representative_canon").get<std::string>());
      out << minilang::pretty_print(tree);
    } catch (const ValidationError&) {
      out << cluster.at("representative_canon").get<std::string>() << "\n";
    }
    out << "```\n\n";
    out << "top members:\n\n";
    for (const json& member : cluster.at("top_members")) {
      out << "- `" << member.at("canon").get<std::string>() << "` x"
          << member.at("count").get<int>() << "\n";
    }
    out << "\n";
  }
}

}  // namespace codekc::pipeline::detail
