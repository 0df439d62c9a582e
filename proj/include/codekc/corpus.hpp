#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace codekc::corpus {

// One student attempt. `correct` is the binarized label: exactly score == 1.
struct Submission {
  std::string student_id;
  std::string problem_id;
  int attempt = 1;  // 1 = first attempt, contiguous per (student, problem)
  std::string code;
  double score = 0.0;
  bool correct = false;
  std::optional<std::string> timestamp;
};

struct ProblemInfo {
  std::string problem_id;
  int assignment = 1;  // 1..5
};

struct Corpus {
  std::vector<Submission> submissions;  // file order
  std::vector<ProblemInfo> problems;    // first-appearance order
  std::vector<std::string> students;    // first-appearance order

  int problem_index(const std::string& problem_id) const;  // -1 if unknown
  int assignment_of(const std::string& problem_id) const;

  // Recomputes problems/students from the submission list, preserving
  // first-appearance order; assignments taken from `assignments` lookup.
  static Corpus from_submissions(std::vector<Submission> submissions,
                                 const std::vector<ProblemInfo>& catalog);
};

enum class SplitMode { SubmissionStratified, StudentLevel };

struct SplitSpec {
  double train_frac = 0.8;
  double val_frac = 0.1;
  double test_frac = 0.1;
  SplitMode mode = SplitMode::SubmissionStratified;
  std::uint64_t seed = 0;
};

// JSON-lines loader. Derives `correct` by binarization, validates duplicates,
// score range and assignment consistency; errors carry the offending line
// number. strict_attempts additionally requires per-(student, problem)
// attempt numbers contiguous from 1 - true for input corpora, false for
// derived artifacts (filtering and splitting legitimately leave gaps).
Corpus load_corpus(const std::filesystem::path& path, bool strict_attempts = true);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct Rejected {
  Submission submission;
  std::string reason;
};

using ParseProbe = std::function<std::optional<std::string>(const std::string& code)>;

// Default probe parses with the mini-language parser.
ParseProbe minilang_probe();

// Partition into (parseable, rejected). Idempotent on the retained part.
std::pair<Corpus, std::vector<Rejected>> filter_unparsable(const Corpus& corpus,
                                                           const ParseProbe& probe = minilang_probe());

void write_rejected_csv(const std::filesystem::path& path, const std::vector<Rejected>& rejected);

struct AnomalyOptions {
  double early_fail_min = 0.7;
  double late_success_min = 0.9;
  int min_attempts = 6;
};

// Changepoint heuristic over each student's first attempts in problem order:
// flags students whose early fail rate and late success rate both clear the
// thresholds with at least min_attempts/2 first attempts on each side.
std::set<std::string> detect_anomalous_students(const Corpus& corpus, const AnomalyOptions& opts = {});

struct SplitResult {
  Corpus train;
  Corpus val;
  Corpus test;
};

SplitResult split_dataset(const Corpus& corpus, const SplitSpec& spec);

}  // namespace codekc::corpus
