#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "codekc/corpus.hpp"

namespace codekc::synth {

struct PatternParams {
  double a = 0.8;  // first-opportunity error rate
  double b = 0.8;  // practice decay exponent; 0 = flat (no learning)
};

struct SynthConfig {
  int students = 40;
  int problems = 12;
  std::vector<PatternParams> patterns;  // one per planted pattern, >= 2
  int patterns_per_problem = 3;         // used when layout is empty
  // Per-problem pattern ids. Empty -> round-robin over the pattern set.
  std::vector<std::vector<int>> layout;
  int max_attempts = 2;
  double retry_decay = 0.5;  // per-retry multiplier on a failed pattern's error rate
  std::uint64_t seed = 1;
};

struct PlantedPattern {
  int pattern_id = 0;
  std::string name;
  std::string canon;  // normalized canon of the pattern's top anchor subtree
  double a = 0.0;
  double b = 0.0;
  std::vector<std::string> problems;
};

struct PlantedSubmission {
  std::string student_id;
  std::string problem_id;
  int attempt = 1;
  std::vector<int> exercised;  // pattern ids in the problem
  std::vector<int> corrupted;  // subset realized with a structure-corrupting edit
};

struct GroundTruth {
  std::vector<PlantedPattern> patterns;
  // mastery[p][n-1] = planted error probability at opportunity n.
  std::vector<std::vector<double>> mastery;
  std::vector<PlantedSubmission> submissions;

  void save(const std::string& path) const;
  static GroundTruth load(const std::string& path);
};

std::size_t template_library_size();

// Deterministic function of the config (single seeded stream). Each student
// works through the problems in order; per-pattern first-attempt error
// follows p_err(n) = a * n^-b over that student's opportunity count n, and a
// failed pattern is emitted with a structure-corrupting edit.
std::pair<corpus::Corpus, GroundTruth> generate_synthetic_corpus(const SynthConfig& config);

}  // namespace codekc::synth
