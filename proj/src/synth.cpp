#include "codekc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "codekc/errors.hpp"
#include "codekc/minilang.hpp"
#include "codekc/pattern.hpp"
#include "codekc/rng.hpp"
#include "json.hpp"

namespace codekc::synth {

namespace {

using minilang::NodeKind;

// A template instantiation context: fresh variable names, literal values, a
// function name, and whether to apply the template's corrupting edit.
struct Instance {
  std::vector<std::string> vars;
  std::vector<std::string> lits;
  std::string func;
  bool corrupt = false;
};

struct TemplateDef {
  const char* name;
  int n_vars;
  int n_lits;
  NodeKind top_kind;
  std::string (*emit)(const Instance&);
};

std::string emit_loop_sum(const Instance& t) {
  const auto& v = t.vars;
  std::string cmp = t.corrupt ? ">" : "<";
  return "int " + v[0] + " = 0;\nint " + v[1] + " = 0;\nint " + v[2] + " = " + t.lits[0] +
         ";\nwhile (" + v[0] + " " + cmp + " " + v[2] + ") {\n  " + v[1] + " = " + v[1] + " + " +
         v[0] + ";\n  " + v[0] + " = " + v[0] + " + 1;\n}\n";
}

std::string emit_loop_count(const Instance& t) {
  const auto& v = t.vars;
  std::string cmp = t.corrupt ? "<=" : "<";
  return "int " + v[0] + " = 0;\nint " + v[1] + " = " + t.lits[0] + ";\nfor (int " + v[2] +
         " = 0; " + v[2] + " " + cmp + " " + v[1] + "; " + v[2] + " = " + v[2] + " + 1) {\n  " +
         v[0] + " = " + v[0] + " + " + v[2] + ";\n}\n";
}

std::string emit_guard_update(const Instance& t) {
  const auto& v = t.vars;
  std::string cmp = t.corrupt ? "<" : ">";
  return "int " + v[0] + " = " + t.lits[0] + ";\nint " + v[1] + " = " + t.lits[1] + ";\nif (" +
         v[0] + " " + cmp + " " + v[1] + ") {\n  " + v[1] + " = " + v[0] + ";\n}\n";
}

std::string emit_nested_guard(const Instance& t) {
  const auto& v = t.vars;
  std::string cmp = t.corrupt ? "<" : ">";
  return "int " + v[0] + " = " + t.lits[0] + ";\nint " + v[1] + " = " + t.lits[1] + ";\nint " +
         v[2] + " = 0;\nif (" + v[0] + " " + cmp + " 0) {\n  if (" + v[1] + " > 0) {\n    " + v[2] +
         " = " + v[2] + " + 1;\n  }\n}\n";
}

std::string emit_clamp_choice(const Instance& t) {
  const auto& v = t.vars;
  std::string cmp = t.corrupt ? ">" : "<";
  return "int " + v[0] + " = " + t.lits[0] + ";\nint " + v[1] + " = " + t.lits[1] + ";\nint " +
         v[2] + " = (" + v[0] + " " + cmp + " " + v[1] + ") ? " + v[1] + " : " + v[0] + ";\n";
}

std::string emit_guarded_call(const Instance& t) {
  const auto& v = t.vars;
  std::string args = t.corrupt ? v[1] : v[1] + ", " + v[0];
  return "int " + v[0] + " = " + t.lits[0] + ";\nint " + v[1] + " = " + t.lits[1] + ";\nif (" +
         v[0] + " > 0) {\n  " + v[1] + " = " + t.func + "(" + args + ");\n}\n";
}

std::string emit_countdown(const Instance& t) {
  const auto& v = t.vars;
  std::string op = t.corrupt ? "+" : "-";
  return "int " + v[0] + " = " + t.lits[0] + ";\nwhile (" + v[0] + " > 0) {\n  " + v[0] + " = " +
         v[0] + " " + op + " 1;\n}\n";
}

std::string emit_early_return(const Instance& t) {
  const auto& v = t.vars;
  std::string cmp = t.corrupt ? "<=" : "<";
  return "int " + v[0] + " = " + t.lits[0] + ";\nif (" + v[0] + " " + cmp + " 0) {\n  return 0;\n}\nreturn " +
         v[0] + ";\n";
}

constexpr TemplateDef kTemplates[] = {
    {"loop_sum", 3, 1, NodeKind::While, emit_loop_sum},
    {"loop_count", 3, 1, NodeKind::For, emit_loop_count},
    {"guard_update", 2, 2, NodeKind::If, emit_guard_update},
    {"nested_guard", 3, 2, NodeKind::If, emit_nested_guard},
    {"clamp_choice", 3, 2, NodeKind::VarDecl, emit_clamp_choice},
    {"guarded_call", 2, 2, NodeKind::If, emit_guarded_call},
    {"countdown", 1, 1, NodeKind::While, emit_countdown},
    {"early_return", 1, 1, NodeKind::If, emit_early_return},
};

const char* kVarPool[] = {"a", "b", "c", "d", "e2", "i", "j", "k", "m", "n",
                          "p", "q", "r", "s", "t", "u", "v", "w", "x", "y", "z"};
const char* kFuncPool[] = {"calc", "step", "combine", "helper", "adjust"};

Instance draw_instance(const TemplateDef& tpl, Rng& rng, std::set<std::string>& used) {
  Instance inst;
  for (int i = 0; i < tpl.n_vars; ++i) {
    for (;;) {
      std::string name = kVarPool[rng.integer(std::size(kVarPool))];
      if (used.insert(name).second) {
        inst.vars.push_back(name);
        break;
      }
    }
  }
  for (int i = 0; i < tpl.n_lits; ++i)
    inst.lits.push_back(std::to_string(1 + rng.integer(9)));
  inst.func = kFuncPool[rng.integer(std::size(kFuncPool))];
  return inst;
}

// Normalized canon of the template's top anchor: the anchor of the
// designated kind with the most nodes (earliest on ties).
std::string top_canon(const TemplateDef& tpl) {
  Instance ref;
  for (int i = 0; i < tpl.n_vars; ++i) ref.vars.push_back("v" + std::to_string(i));
  for (int i = 0; i < tpl.n_lits; ++i) ref.lits.push_back("1");
  ref.func = "fn";
  std::string source = "{\n" + tpl.emit(ref) + "}\n";
  auto ast = minilang::parse(source);
  auto seq = pattern::extract_subtrees(ast);
  const pattern::Subtree* best = nullptr;
  std::size_t best_size = 0;
  for (const auto& st : seq.subtrees) {
    if (st.tree.kind != tpl.top_kind) continue;
    std::size_t size = minilang::tree_size(st.tree);
    if (best == nullptr || size > best_size) {
      best = &st;
      best_size = size;
    }
  }
  if (best == nullptr) throw ValidationError(std::string("template ") + tpl.name + " has no top anchor");
  auto norm = pattern::normalize_tree(best->tree);
  return pattern::serialize_subtree(norm);
}

std::string pad2(int v) {
  std::string s = std::to_string(v);
  return s.size() < 2 ? "0" + s : s;
}

}  // namespace

std::size_t template_library_size() { return std::size(kTemplates); }

std::pair<corpus::Corpus, GroundTruth> generate_synthetic_corpus(const SynthConfig& config) {
  const int n_patterns = static_cast<int>(config.patterns.size());
  if (n_patterns < 2) throw ValidationError("synthetic config needs at least 2 planted patterns");
  if (config.students < 2) throw ValidationError("synthetic config needs at least 2 students");
  if (config.problems < 1) throw ValidationError("synthetic config needs at least 1 problem");
  if (static_cast<std::size_t>(n_patterns) > std::size(kTemplates))
    throw ValidationError("synthetic config requests more patterns than the template library holds");
  if (config.max_attempts < 1) throw ValidationError("max_attempts must be >= 1");

  // Problem layout.
  std::vector<std::vector<int>> layout = config.layout;
  if (layout.empty()) {
    if (config.patterns_per_problem < 1 || config.patterns_per_problem > n_patterns)
      throw ValidationError("patterns_per_problem exceeds the planted pattern set");
    for (int p = 0; p < config.problems; ++p) {
      std::vector<int> ids;
      for (int j = 0; j < config.patterns_per_problem; ++j)
        ids.push_back((p * config.patterns_per_problem + j) % n_patterns);
      layout.push_back(std::move(ids));
    }
  }
  if (static_cast<int>(layout.size()) != config.problems)
    throw ValidationError("layout size does not match the problem count");
  for (const auto& ids : layout) {
    if (ids.empty()) throw ValidationError("layout has a problem with no patterns");
    std::set<int> distinct(ids.begin(), ids.end());
    if (distinct.size() != ids.size()) throw ValidationError("layout repeats a pattern within a problem");
    for (int id : ids)
      if (id < 0 || id >= n_patterns) throw ValidationError("layout references an unknown pattern id");
  }

  GroundTruth truth;
  int max_opportunities = 0;
  {
    std::vector<int> opportunity_count(static_cast<std::size_t>(n_patterns), 0);
    for (const auto& ids : layout)
      for (int id : ids) ++opportunity_count[static_cast<std::size_t>(id)];
    for (int p = 0; p < n_patterns; ++p)
      max_opportunities = std::max(max_opportunities, opportunity_count[static_cast<std::size_t>(p)]);
  }
  for (int p = 0; p < n_patterns; ++p) {
    PlantedPattern planted;
    planted.pattern_id = p;
    planted.name = kTemplates[p].name;
    planted.canon = top_canon(kTemplates[p]);
    planted.a = config.patterns[static_cast<std::size_t>(p)].a;
    planted.b = config.patterns[static_cast<std::size_t>(p)].b;
    truth.patterns.push_back(std::move(planted));
    std::vector<double> curve;
    for (int n = 1; n <= max_opportunities; ++n) {
      double p_err = config.patterns[static_cast<std::size_t>(p)].a *
                     std::pow(static_cast<double>(n), -config.patterns[static_cast<std::size_t>(p)].b);
      curve.push_back(std::clamp(p_err, 0.0, 1.0));
    }
    truth.mastery.push_back(std::move(curve));
  }

  std::vector<corpus::ProblemInfo> catalog;
  for (int p = 0; p < config.problems; ++p) {
    std::string problem_id = "p" + pad2(p + 1);
    int assignment = 1 + (p * 5) / config.problems;
    catalog.push_back({problem_id, std::min(assignment, 5)});
    for (int id : layout[static_cast<std::size_t>(p)])
      truth.patterns[static_cast<std::size_t>(id)].problems.push_back(problem_id);
  }

  Rng rng(config.seed);
  std::vector<corpus::Submission> submissions;

  for (int u = 0; u < config.students; ++u) {
    std::string student_id = "s" + pad2(u + 1);
    std::vector<int> opportunities(static_cast<std::size_t>(n_patterns), 0);
    for (int p = 0; p < config.problems; ++p) {
      const std::string& problem_id = catalog[static_cast<std::size_t>(p)].problem_id;
      const std::vector<int>& ids = layout[static_cast<std::size_t>(p)];

      // Fixed names/literals for this (student, problem); retries re-emit
      // with the same surface, only the corruption set changes.
      std::set<std::string> used_names;
      std::vector<Instance> instances;
      std::vector<double> p_err;
      for (int id : ids) {
        instances.push_back(draw_instance(kTemplates[id], rng, used_names));
        int n = ++opportunities[static_cast<std::size_t>(id)];
        double a = config.patterns[static_cast<std::size_t>(id)].a;
        double b = config.patterns[static_cast<std::size_t>(id)].b;
        p_err.push_back(std::clamp(a * std::pow(static_cast<double>(n), -b), 0.0, 1.0));
      }

      std::vector<bool> failed(ids.size(), false);
      for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
        double decay = std::pow(config.retry_decay, attempt - 1);
        if (attempt == 1) {
          for (std::size_t j = 0; j < ids.size(); ++j) failed[j] = rng.uniform() < p_err[j];
        } else {
          for (std::size_t j = 0; j < ids.size(); ++j)
            if (failed[j]) failed[j] = rng.uniform() < p_err[j] * decay;
        }

        std::string code = "{\n";
        PlantedSubmission planted;
        planted.student_id = student_id;
        planted.problem_id = problem_id;
        planted.attempt = attempt;
        int n_failed = 0;
        for (std::size_t j = 0; j < ids.size(); ++j) {
          Instance inst = instances[j];
          inst.corrupt = failed[j];
          code += kTemplates[ids[j]].emit(inst);
          planted.exercised.push_back(ids[j]);
          if (failed[j]) {
            planted.corrupted.push_back(ids[j]);
            ++n_failed;
          }
        }
        code += "}\n";

        corpus::Submission s;
        s.student_id = student_id;
        s.problem_id = problem_id;
        s.attempt = attempt;
        s.code = std::move(code);
        s.score = n_failed == 0 ? 1.0 : std::max(0.1, 1.0 - 0.3 * n_failed);
        s.correct = n_failed == 0;
        submissions.push_back(std::move(s));
        truth.submissions.push_back(std::move(planted));

        if (n_failed == 0) break;
      }
    }
  }

  return {corpus::Corpus::from_submissions(std::move(submissions), catalog), std::move(truth)};
}

void GroundTruth::save(const std::string& path) const {
  nlohmann::json j;
  j["patterns"] = nlohmann::json::array();
  for (const PlantedPattern& p : patterns) {
    j["patterns"].push_back({{"pattern_id", p.pattern_id},
                             {"name", p.name},
                             {"canon", p.canon},
                             {"a", p.a},
                             {"b", p.b},
                             {"problems", p.problems}});
  }
  j["mastery"] = mastery;
  j["submissions"] = nlohmann::json::array();
  for (const PlantedSubmission& s : submissions) {
    j["submissions"].push_back({{"student_id", s.student_id},
                                {"problem_id", s.problem_id},
                                {"attempt", s.attempt},
                                {"exercised", s.exercised},
                                {"corrupted", s.corrupted}});
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write ground truth file: " + path);
  out << j.dump(2) << "\n";
}

GroundTruth GroundTruth::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw StageError("missing ground truth file: " + path);
  nlohmann::json j;
  in >> j;
  GroundTruth truth;
  for (const auto& p : j.at("patterns")) {
    PlantedPattern planted;
    planted.pattern_id = p.at("pattern_id").get<int>();
    planted.name = p.at("name").get<std::string>();
    planted.canon = p.at("canon").get<std::string>();
    planted.a = p.at("a").get<double>();
    planted.b = p.at("b").get<double>();
    planted.problems = p.at("problems").get<std::vector<std::string>>();
    truth.patterns.push_back(std::move(planted));
  }
  truth.mastery = j.at("mastery").get<std::vector<std::vector<double>>>();
  for (const auto& s : j.at("submissions")) {
    PlantedSubmission planted;
    planted.student_id = s.at("student_id").get<std::string>();
    planted.problem_id = s.at("problem_id").get<std::string>();
    planted.attempt = s.at("attempt").get<int>();
    planted.exercised = s.at("exercised").get<std::vector<int>>();
    planted.corrupted = s.at("corrupted").get<std::vector<int>>();
    truth.submissions.push_back(std::move(planted));
  }
  return truth;
}

}  // namespace codekc::synth
