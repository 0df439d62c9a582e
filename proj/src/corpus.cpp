#include "codekc/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "codekc/errors.hpp"
#include "codekc/minilang.hpp"
#include "codekc/rng.hpp"
#include "json.hpp"

namespace codekc::corpus {

int Corpus::problem_index(const std::string& problem_id) const {
  for (std::size_t i = 0; i < problems.size(); ++i)
    if (problems[i].problem_id == problem_id) return static_cast<int>(i);
  return -1;
}

int Corpus::assignment_of(const std::string& problem_id) const {
  int idx = problem_index(problem_id);
  return idx < 0 ? 0 : problems[static_cast<std::size_t>(idx)].assignment;
}

Corpus Corpus::from_submissions(std::vector<Submission> submissions,
                                const std::vector<ProblemInfo>& catalog) {
  Corpus c;
  c.submissions = std::move(submissions);
  std::set<std::string> seen_problems, seen_students;
  for (const Submission& s : c.submissions) {
    if (seen_problems.insert(s.problem_id).second) {
      int assignment = 1;
      for (const ProblemInfo& p : catalog)
        if (p.problem_id == s.problem_id) assignment = p.assignment;
      c.problems.push_back({s.problem_id, assignment});
    }
    if (seen_students.insert(s.student_id).second) c.students.push_back(s.student_id);
  }
  return c;
}

Corpus load_corpus(const std::filesystem::path& path, bool strict_attempts) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus file: " + path.string());

  Corpus corpus;
  std::map<std::string, int> problem_assignment;
  std::set<std::string> seen_students;
  std::set<std::tuple<std::string, std::string, int>> seen_keys;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("corpus line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    Submission s;
    try {
      s.student_id = j.at("student_id").get<std::string>();
      s.problem_id = j.at("problem_id").get<std::string>();
      s.attempt = j.at("attempt").get<int>();
      s.score = j.at("score").get<double>();
      s.code = j.at("code").get<std::string>();
      if (j.contains("timestamp")) s.timestamp = j.at("timestamp").get<std::string>();
      int assignment = j.at("assignment").get<int>();
      if (assignment < 1 || assignment > 5)
        throw ValidationError("corpus line " + std::to_string(line_no) + ": assignment out of range 1..5");
      auto [it, inserted] = problem_assignment.emplace(s.problem_id, assignment);
      if (!inserted && it->second != assignment)
        throw ValidationError("corpus line " + std::to_string(line_no) + ": problem " + s.problem_id +
                              " has conflicting assignment indices");
      if (inserted) corpus.problems.push_back({s.problem_id, assignment});
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("corpus line " + std::to_string(line_no) + ": bad record: " + e.what());
    }
    if (s.score < 0.0 || s.score > 1.0)
      throw ValidationError("corpus line " + std::to_string(line_no) + ": score outside [0,1]");
    if (s.attempt < 1)
      throw ValidationError("corpus line " + std::to_string(line_no) + ": attempt must be >= 1");
    s.correct = s.score == 1.0;  // binarization: all test cases passed
    if (!seen_keys.insert({s.student_id, s.problem_id, s.attempt}).second)
      throw ValidationError("corpus line " + std::to_string(line_no) + ": duplicate (student, problem, attempt)");
    if (seen_students.insert(s.student_id).second) corpus.students.push_back(s.student_id);
    corpus.submissions.push_back(std::move(s));
  }

  if (strict_attempts) {
    std::map<std::pair<std::string, std::string>, std::vector<int>> attempts;
    for (const Submission& s : corpus.submissions)
      attempts[{s.student_id, s.problem_id}].push_back(s.attempt);
    for (auto& [key, list] : attempts) {
      std::sort(list.begin(), list.end());
      for (std::size_t i = 0; i < list.size(); ++i) {
        if (list[i] != static_cast<int>(i) + 1)
          throw ValidationError("attempts for (" + key.first + ", " + key.second +
                                ") are not contiguous from 1");
      }
    }
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write corpus file: " + path.string());
  for (const Submission& s : corpus.submissions) {
    nlohmann::json j;
    j["student_id"] = s.student_id;
    j["problem_id"] = s.problem_id;
    j["assignment"] = corpus.assignment_of(s.problem_id);
    j["attempt"] = s.attempt;
    j["score"] = s.score;
    j["code"] = s.code;
    if (s.timestamp) j["timestamp"] = *s.timestamp;
    out << j.dump() << "\n";
  }
}

ParseProbe minilang_probe() {
  return [](const std::string& code) -> std::optional<std::string> {
    try {
      minilang::parse(code);
      return std::nullopt;
    } catch (const SyntaxError& e) {
      return std::string(e.what());
    }
  };
}

std::pair<Corpus, std::vector<Rejected>> filter_unparsable(const Corpus& corpus,
                                                           const ParseProbe& probe) {
  std::vector<Submission> kept;
  std::vector<Rejected> rejected;
  for (const Submission& s : corpus.submissions) {
    if (auto reason = probe(s.code))
      rejected.push_back({s, *reason});
    else
      kept.push_back(s);
  }
  return {Corpus::from_submissions(std::move(kept), corpus.problems), std::move(rejected)};
}

void write_rejected_csv(const std::filesystem::path& path, const std::vector<Rejected>& rejected) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write rejected report: " + path.string());
  out << "student_id,problem_id,attempt,reason\n";
  for (const Rejected& r : rejected) {
    std::string reason = r.reason;
    for (char& c : reason)
      if (c == ',' || c == '\n') c = ';';
    out << r.submission.student_id << "," << r.submission.problem_id << "," << r.submission.attempt
        << "," << reason << "\n";
  }
}

std::set<std::string> detect_anomalous_students(const Corpus& corpus, const AnomalyOptions& opts) {
  // First attempts per student, ordered by problem position (a proxy for
  // course order: earlier problems are the simpler ones).
  std::map<std::string, std::vector<std::pair<int, bool>>> first_attempts;
  for (const Submission& s : corpus.submissions) {
    if (s.attempt != 1) continue;
    first_attempts[s.student_id].push_back({corpus.problem_index(s.problem_id), s.correct});
  }

  std::set<std::string> flagged;
  double min_segment = opts.min_attempts / 2.0;
  for (auto& [student, entries] : first_attempts) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::size_t n = entries.size();
    for (std::size_t c = 1; c < n; ++c) {
      double before = static_cast<double>(c);
      double after = static_cast<double>(n - c);
      if (before < min_segment || after < min_segment) continue;
      std::size_t fails_before = 0, passes_after = 0;
      for (std::size_t i = 0; i < c; ++i) fails_before += entries[i].second ? 0 : 1;
      for (std::size_t i = c; i < n; ++i) passes_after += entries[i].second ? 1 : 0;
      if (static_cast<double>(fails_before) / before >= opts.early_fail_min &&
          static_cast<double>(passes_after) / after >= opts.late_success_min) {
        flagged.insert(student);
        break;
      }
    }
  }
  return flagged;
}

namespace {

// Largest-remainder quotas: integer sizes summing to n with ratios closest to
// the fractions; ties resolved toward earlier splits.
std::array<std::size_t, 3> quotas(std::size_t n, const SplitSpec& spec) {
  std::array<double, 3> frac = {spec.train_frac, spec.val_frac, spec.test_frac};
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    double q = frac[static_cast<std::size_t>(i)] * static_cast<double>(n);
    counts[static_cast<std::size_t>(i)] = static_cast<std::size_t>(q);
    remainder[static_cast<std::size_t>(i)] = q - static_cast<double>(counts[static_cast<std::size_t>(i)]);
    assigned += counts[static_cast<std::size_t>(i)];
  }
  while (assigned < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (remainder[static_cast<std::size_t>(i)] > remainder[static_cast<std::size_t>(best)] + 1e-12)
        best = i;
    counts[static_cast<std::size_t>(best)] += 1;
    remainder[static_cast<std::size_t>(best)] = -1.0;
    ++assigned;
  }
  return counts;
}

void validate_spec(const Corpus& corpus, const SplitSpec& spec) {
  if (corpus.submissions.empty()) throw ValidationError("cannot split an empty corpus");
  if (spec.train_frac <= 0 || spec.val_frac <= 0 || spec.test_frac <= 0)
    throw ValidationError("split fractions must be positive");
  if (std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) > 1e-9)
    throw ValidationError("split fractions must sum to 1");
}

}  // namespace

SplitResult split_dataset(const Corpus& corpus, const SplitSpec& spec) {
  validate_spec(corpus, spec);
  Rng rng(spec.seed);

  std::array<std::vector<Submission>, 3> buckets;

  if (spec.mode == SplitMode::SubmissionStratified) {
    // Per-label shuffling + largest-remainder quotas keeps each split's label
    // ratio within the stated tolerance.
    std::array<std::vector<std::size_t>, 2> by_label;
    for (std::size_t i = 0; i < corpus.submissions.size(); ++i)
      by_label[corpus.submissions[i].correct ? 1 : 0].push_back(i);
    for (auto& group : by_label) {
      rng.shuffle(group);
      auto counts = quotas(group.size(), spec);
      std::size_t pos = 0;
      for (int b = 0; b < 3; ++b)
        for (std::size_t i = 0; i < counts[static_cast<std::size_t>(b)]; ++i)
          buckets[static_cast<std::size_t>(b)].push_back(corpus.submissions[group[pos++]]);
    }
  } else {
    std::vector<std::string> students = corpus.students;
    rng.shuffle(students);
    auto counts = quotas(students.size(), spec);
    std::map<std::string, int> bucket_of;
    std::size_t pos = 0;
    for (int b = 0; b < 3; ++b)
      for (std::size_t i = 0; i < counts[static_cast<std::size_t>(b)]; ++i)
        bucket_of[students[pos++]] = b;
    for (const Submission& s : corpus.submissions)
      buckets[static_cast<std::size_t>(bucket_of.at(s.student_id))].push_back(s);
  }

  for (const auto& bucket : buckets)
    if (bucket.empty()) throw ValidationError("split fractions leave an empty split");

  // Restore corpus order inside each split so output is independent of the
  // shuffle path. (Stratified filling above interleaves label groups.)
  std::map<std::tuple<std::string, std::string, int>, std::size_t> index;
  for (std::size_t i = 0; i < corpus.submissions.size(); ++i) {
    const Submission& t = corpus.submissions[i];
    index[{t.student_id, t.problem_id, t.attempt}] = i;
  }
  auto order_key = [&](const Submission& s) {
    auto it = index.find({s.student_id, s.problem_id, s.attempt});
    return it == index.end() ? corpus.submissions.size() : it->second;
  };
  SplitResult result;
  Corpus* outs[3] = {&result.train, &result.val, &result.test};
  for (int b = 0; b < 3; ++b) {
    auto& bucket = buckets[static_cast<std::size_t>(b)];
    std::sort(bucket.begin(), bucket.end(), [&](const Submission& a, const Submission& c) {
      return order_key(a) < order_key(c);
    });
    *outs[b] = Corpus::from_submissions(std::move(bucket), corpus.problems);
  }
  return result;
}

}  // namespace codekc::corpus
