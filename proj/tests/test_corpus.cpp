#include "codekc/corpus.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "codekc/errors.hpp"
#include "codekc/synth.hpp"
#include "doctest.h"

using namespace codekc;
using namespace codekc::corpus;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content) : path(name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

std::string record(const std::string& student, const std::string& problem, int assignment,
                   int attempt, double score, const std::string& code = "{ x = 1; }") {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                R"({"student_id":"%s","problem_id":"%s","assignment":%d,"attempt":%d,"score":%g,"code":"%s"})"
                "\n",
                student.c_str(), problem.c_str(), assignment, attempt, score, code.c_str());
  return buf;
}

}  // namespace

TEST_CASE("load_corpus binarizes scores") {
  TempFile f("t_corpus1.jsonl", record("s1", "p1", 1, 1, 1.0) + record("s1", "p2", 1, 1, 0.6));
  Corpus c = load_corpus(f.path);
  REQUIRE(c.submissions.size() == 2);
  CHECK(c.submissions[0].correct);
  CHECK(!c.submissions[1].correct);
  CHECK(c.students.size() == 1);
  CHECK(c.problems.size() == 2);
}

TEST_CASE("load_corpus empty file") {
  TempFile f("t_corpus2.jsonl", "");
  Corpus c = load_corpus(f.path);
  CHECK(c.submissions.empty());
  CHECK(c.students.empty());
}

TEST_CASE("load_corpus errors name the line") {
  TempFile f("t_corpus3.jsonl", record("s1", "p1", 1, 1, 1.0) + "not json\n");
  try {
    load_corpus(f.path);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("load_corpus rejects duplicates and bad values") {
  TempFile dup("t_corpus4.jsonl", record("s1", "p1", 1, 1, 1.0) + record("s1", "p1", 1, 1, 0.0));
  CHECK_THROWS_AS(load_corpus(dup.path), ValidationError);
  TempFile score("t_corpus5.jsonl", record("s1", "p1", 1, 1, 1.5));
  CHECK_THROWS_AS(load_corpus(score.path), ValidationError);
  TempFile gap("t_corpus6.jsonl", record("s1", "p1", 1, 2, 1.0));
  CHECK_THROWS_AS(load_corpus(gap.path), ValidationError);  // attempts not contiguous from 1
  TempFile assign("t_corpus7.jsonl", record("s1", "p1", 1, 1, 1.0) + record("s2", "p1", 2, 1, 1.0));
  CHECK_THROWS_AS(load_corpus(assign.path), ValidationError);  // conflicting assignment
}

TEST_CASE("filter_unparsable partitions and is idempotent") {
  TempFile f("t_corpus8.jsonl", record("s1", "p1", 1, 1, 1.0, "{ x = 1; }") +
                                    record("s2", "p1", 1, 1, 0.0, "{ if (x }") +
                                    record("s3", "p1", 1, 1, 1.0, "{ y = 2; }"));
  Corpus c = load_corpus(f.path);
  auto [kept, rejected] = filter_unparsable(c);
  CHECK(kept.submissions.size() == 2);
  CHECK(rejected.size() == 1);
  CHECK(rejected[0].submission.student_id == "s2");
  CHECK(kept.submissions.size() + rejected.size() == c.submissions.size());

  auto [kept2, rejected2] = filter_unparsable(kept);
  CHECK(kept2.submissions.size() == kept.submissions.size());
  CHECK(rejected2.empty());
}

TEST_CASE("filter_unparsable extremes") {
  TempFile all_bad("t_corpus9.jsonl", record("s1", "p1", 1, 1, 1.0, "{{{") +
                                          record("s2", "p1", 1, 1, 0.0, ")"));
  auto [kept, rejected] = filter_unparsable(load_corpus(all_bad.path));
  CHECK(kept.submissions.empty());
  CHECK(rejected.size() == 2);
}

TEST_CASE("detect_anomalous_students changepoint rule") {
  // 3 fails then 6 passes: flagged at c = 4.
  std::string rows;
  for (int p = 1; p <= 9; ++p)
    rows += record("s1", "p" + std::to_string(p), 1, 1, p <= 3 ? 0.0 : 1.0);
  // All-correct student: never flagged.
  for (int p = 1; p <= 9; ++p) rows += record("s2", "p" + std::to_string(p), 1, 1, 1.0);
  // 5 first attempts only: below min_attempts, never flagged.
  for (int p = 1; p <= 5; ++p)
    rows += record("s3", "p" + std::to_string(p), 1, 1, p <= 2 ? 0.0 : 1.0);
  TempFile f("t_corpus10.jsonl", rows);
  auto flagged = detect_anomalous_students(load_corpus(f.path));
  CHECK(flagged.count("s1") == 1);
  CHECK(flagged.count("s2") == 0);
  CHECK(flagged.count("s3") == 0);
}

TEST_CASE("split_dataset stratified proportions") {
  // 100 submissions, 40 correct: exact 80/10/10 with 32/4/4 correct.
  std::string rows;
  for (int i = 0; i < 100; ++i) {
    std::string student = "s" + std::to_string(i);
    rows += record(student, "p1", 1, 1, i < 40 ? 1.0 : 0.5);
  }
  TempFile f("t_corpus11.jsonl", rows);
  Corpus c = load_corpus(f.path);
  SplitSpec spec{0.8, 0.1, 0.1, SplitMode::SubmissionStratified, 7};
  SplitResult r = split_dataset(c, spec);
  CHECK(r.train.submissions.size() == 80);
  CHECK(r.val.submissions.size() == 10);
  CHECK(r.test.submissions.size() == 10);
  auto n_correct = [](const Corpus& corpus) {
    int n = 0;
    for (const auto& s : corpus.submissions) n += s.correct ? 1 : 0;
    return n;
  };
  CHECK(n_correct(r.train) == 32);
  CHECK(n_correct(r.val) == 4);
  CHECK(n_correct(r.test) == 4);

  // Partition: no overlap, union = corpus.
  std::set<std::string> seen;
  for (const Corpus* part : {&r.train, &r.val, &r.test})
    for (const auto& s : part->submissions) CHECK(seen.insert(s.student_id).second);
  CHECK(seen.size() == 100);
}

TEST_CASE("split_dataset student-level keeps students whole") {
  std::string rows;
  for (int i = 0; i < 20; ++i) {
    std::string student = "s" + std::to_string(i);
    for (int p = 1; p <= 3; ++p)
      rows += record(student, "p" + std::to_string(p), 1, 1, (i + p) % 2 ? 1.0 : 0.0);
  }
  TempFile f("t_corpus12.jsonl", rows);
  Corpus c = load_corpus(f.path);
  SplitSpec spec{0.6, 0.2, 0.2, SplitMode::StudentLevel, 3};
  SplitResult r = split_dataset(c, spec);
  std::set<std::string> train_students(r.train.students.begin(), r.train.students.end());
  for (const auto& s : r.val.submissions) CHECK(!train_students.count(s.student_id));
  for (const auto& s : r.test.submissions) CHECK(!train_students.count(s.student_id));
  CHECK(r.train.submissions.size() + r.val.submissions.size() + r.test.submissions.size() ==
        c.submissions.size());
}

TEST_CASE("split_dataset determinism and errors") {
  std::string rows;
  for (int i = 0; i < 30; ++i)
    rows += record("s" + std::to_string(i), "p1", 1, 1, i % 2 ? 1.0 : 0.0);
  TempFile f("t_corpus13.jsonl", rows);
  Corpus c = load_corpus(f.path);
  SplitSpec spec{0.7, 0.15, 0.15, SplitMode::SubmissionStratified, 42};
  SplitResult a = split_dataset(c, spec);
  SplitResult b = split_dataset(c, spec);
  REQUIRE(a.train.submissions.size() == b.train.submissions.size());
  for (std::size_t i = 0; i < a.train.submissions.size(); ++i)
    CHECK(a.train.submissions[i].student_id == b.train.submissions[i].student_id);

  SplitSpec bad{0.98, 0.01, 0.01, SplitMode::SubmissionStratified, 1};
  CHECK_THROWS_AS(split_dataset(c, bad), ValidationError);  // empty split
  SplitSpec bad2{0.5, 0.2, 0.2, SplitMode::SubmissionStratified, 1};
  CHECK_THROWS_AS(split_dataset(c, bad2), ValidationError);  // fractions do not sum to 1
  Corpus empty;
  CHECK_THROWS_AS(split_dataset(empty, spec), ValidationError);
}

TEST_CASE("save/load round-trip") {
  TempFile f("t_corpus14.jsonl", record("s1", "p1", 2, 1, 0.7) + record("s1", "p1", 2, 2, 1.0));
  Corpus c = load_corpus(f.path);
  save_corpus(c, "t_corpus14b.jsonl");
  Corpus c2 = load_corpus("t_corpus14b.jsonl");
  REQUIRE(c2.submissions.size() == c.submissions.size());
  CHECK(c2.submissions[1].attempt == 2);
  CHECK(c2.assignment_of("p1") == 2);
  std::remove("t_corpus14b.jsonl");
}

// ---- synthetic generator ----

TEST_CASE("synthetic corpus determinism") {
  synth::SynthConfig config;
  config.students = 10;
  config.problems = 6;
  config.patterns = {{0.8, 0.8}, {0.7, 0.6}, {0.6, 0.0}};
  config.patterns_per_problem = 2;
  config.seed = 1;
  auto [c1, t1] = synth::generate_synthetic_corpus(config);
  auto [c2, t2] = synth::generate_synthetic_corpus(config);
  REQUIRE(c1.submissions.size() == c2.submissions.size());
  for (std::size_t i = 0; i < c1.submissions.size(); ++i) {
    CHECK(c1.submissions[i].code == c2.submissions[i].code);
    CHECK(c1.submissions[i].score == c2.submissions[i].score);
  }
  CHECK(t1.patterns.size() == 3);
}

TEST_CASE("synthetic corpus parses and binarizes") {
  synth::SynthConfig config;
  config.students = 8;
  config.problems = 4;
  config.patterns = {{0.8, 0.8}, {0.5, 0.5}};
  config.patterns_per_problem = 2;
  auto [corpus, truth] = synth::generate_synthetic_corpus(config);
  auto [kept, rejected] = filter_unparsable(corpus);
  CHECK(rejected.empty());  // corrupted programs still parse
  for (const Submission& s : corpus.submissions) CHECK(s.correct == (s.score == 1.0));
}

TEST_CASE("synthetic flat pattern has flat planted mastery") {
  synth::SynthConfig config;
  config.students = 6;
  config.problems = 6;
  config.patterns = {{0.8, 0.9}, {0.5, 0.0}};
  config.patterns_per_problem = 2;
  auto [corpus, truth] = synth::generate_synthetic_corpus(config);
  const auto& flat = truth.mastery[1];
  for (double p : flat) CHECK(p == doctest::Approx(0.5));
  const auto& declining = truth.mastery[0];
  for (std::size_t i = 1; i < declining.size(); ++i) CHECK(declining[i] < declining[i - 1]);
}

TEST_CASE("synthetic first-opportunity error rate matches a") {
  synth::SynthConfig config;
  config.students = 200;  // Monte-Carlo resolution
  config.problems = 2;
  config.patterns = {{0.8, 0.8}, {0.4, 0.5}};
  config.patterns_per_problem = 2;
  config.seed = 9;
  auto [corpus, truth] = synth::generate_synthetic_corpus(config);
  // Pattern 0 appears in problem p01; empirical first-attempt corruption rate
  // at opportunity 1 should land near a = 0.8.
  int fails = 0, total = 0;
  for (const auto& s : truth.submissions) {
    if (s.problem_id != "p01" || s.attempt != 1) continue;
    ++total;
    for (int c : s.corrupted) fails += c == 0 ? 1 : 0;
  }
  REQUIRE(total == 200);
  double rate = static_cast<double>(fails) / total;
  CHECK(rate == doctest::Approx(0.8).epsilon(0.125));
}

TEST_CASE("synthetic generator validates its config") {
  synth::SynthConfig config;
  config.patterns = {{0.8, 0.8}};  // only one pattern
  CHECK_THROWS_AS(synth::generate_synthetic_corpus(config), ValidationError);
  config.patterns = {{0.8, 0.8}, {0.7, 0.7}};
  config.patterns_per_problem = 5;  // more than the pattern set
  CHECK_THROWS_AS(synth::generate_synthetic_corpus(config), ValidationError);
  config.patterns_per_problem = 2;
  config.students = 1;
  CHECK_THROWS_AS(synth::generate_synthetic_corpus(config), ValidationError);
}

TEST_CASE("synthetic ground truth save/load") {
  synth::SynthConfig config;
  config.students = 4;
  config.problems = 3;
  config.patterns = {{0.8, 0.8}, {0.7, 0.7}};
  config.patterns_per_problem = 2;
  auto [corpus, truth] = synth::generate_synthetic_corpus(config);
  truth.save("t_truth.json");
  synth::GroundTruth loaded = synth::GroundTruth::load("t_truth.json");
  CHECK(loaded.patterns.size() == truth.patterns.size());
  CHECK(loaded.patterns[0].canon == truth.patterns[0].canon);
  CHECK(loaded.submissions.size() == truth.submissions.size());
  std::remove("t_truth.json");
}
