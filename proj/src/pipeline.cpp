#include "codekc/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "codekc/analytics/auc.hpp"
#include "codekc/errors.hpp"
#include "codekc/kc.hpp"
#include "codekc/rng.hpp"
#include "json.hpp"

namespace codekc::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---- artifact catalog ----

const std::map<std::string, std::vector<std::string>> kStageOutputs = {
    {"synth", {"corpus.jsonl", "ground_truth.json"}},
    {"ingest",
     {"retained.jsonl", "rejected.csv", "anomalous.json", "train.jsonl", "val.jsonl", "test.jsonl",
      "patterns.jsonl"}},
    {"train-sann", {"vocab.json", "sann.ckpt", "sann_history.csv"}},
    {"extract", {"attention.jsonl", "important.jsonl"}},
    {"train-vae", {"vae.ckpt", "vae_history.csv"}},
    {"cluster", {"latents.jsonl", "kcs.json"}},
    {"outcomes", {"outcomes.jsonl", "vectors.csv"}},
    {"curves", {"curves.csv"}},
    {"afm", {"afm.csv"}},
    {"dkt", {"dkt_metrics.json", "dkt_events.csv"}},
    {"report", {"report.md"}},
};

const std::map<std::string, std::vector<std::string>> kStageInputs = {
    {"synth", {}},
    {"ingest", {}},  // corpus path checked separately
    {"train-sann", {"train.jsonl", "val.jsonl"}},
    {"extract", {"retained.jsonl", "vocab.json", "sann.ckpt"}},
    {"train-vae", {"attention.jsonl", "vocab.json"}},
    {"cluster", {"important.jsonl", "vae.ckpt", "vocab.json"}},
    {"outcomes", {"attention.jsonl", "kcs.json", "vae.ckpt", "vocab.json"}},
    {"curves", {"outcomes.jsonl", "retained.jsonl"}},
    {"afm", {"outcomes.jsonl", "retained.jsonl"}},
    {"dkt", {"retained.jsonl", "vectors.csv"}},
    {"report",
     {"retained.jsonl", "kcs.json", "outcomes.jsonl", "curves.csv", "afm.csv", "dkt_metrics.json"}},
};

std::string fmt_float(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json submission_ref_json(const pattern::SubmissionRef& ref) {
  return {{"student_id", ref.student_id}, {"problem_id", ref.problem_id}, {"attempt", ref.attempt}};
}

pattern::SubmissionRef submission_ref_from(const json& j) {
  return {j.at("student_id").get<std::string>(), j.at("problem_id").get<std::string>(),
          j.at("attempt").get<int>()};
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw StageError("missing artifact: " + path.string());
  std::vector<json> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

// Per-submission attention record, the handoff between the SANN and VAE
// halves of the pipeline.
struct AttentionRow {
  pattern::SubmissionRef submission;
  bool correct = false;
  std::vector<std::size_t> positions;
  std::vector<std::string> canons;  // normalized
  std::vector<double> weights;
};

std::vector<AttentionRow> read_attention(const fs::path& path) {
  std::vector<AttentionRow> rows;
  for (const json& j : read_jsonl(path)) {
    AttentionRow row;
    row.submission = submission_ref_from(j.at("submission"));
    row.correct = j.at("label").get<bool>();
    for (const json& slot : j.at("slots")) {
      row.positions.push_back(slot.at("position").get<std::size_t>());
      row.canons.push_back(slot.at("canon_normalized").get<std::string>());
      row.weights.push_back(slot.at("weight").get<double>());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

pattern::SubtreeSequence sequence_from_row(const AttentionRow& row) {
  pattern::SubtreeSequence seq;
  seq.submission = row.submission;
  for (std::size_t i = 0; i < row.canons.size(); ++i) {
    pattern::Subtree st;
    st.tree = pattern::parse_canon(row.canons[i]);
    st.canon = row.canons[i];
    st.position = row.positions[i];
    seq.subtrees.push_back(std::move(st));
  }
  return seq;
}

fs::path corpus_source_path(const PipelineConfig& config) {
  if (!config.corpus_path.empty()) return config.corpus_path;
  return fs::path(config.workdir) / "corpus.jsonl";
}

// ---- stage bodies ----

void stage_synth(const PipelineConfig& config) {
  auto [corpus, truth] = synth::generate_synthetic_corpus(config.synth);
  corpus::save_corpus(corpus, artifact_path(config, "corpus.jsonl"));
  truth.save(artifact_path(config, "ground_truth.json").string());
}

void stage_ingest(const PipelineConfig& config) {
  fs::path source = corpus_source_path(config);
  if (!fs::exists(source))
    throw StageError("missing corpus file: " + source.string() +
                     " (run the synth stage or set paths.corpus)");
  corpus::Corpus loaded = corpus::load_corpus(source);
  auto [parseable, rejected] = corpus::filter_unparsable(loaded);
  corpus::write_rejected_csv(artifact_path(config, "rejected.csv"), rejected);

  std::set<std::string> anomalous = corpus::detect_anomalous_students(parseable, config.anomaly);
  std::vector<corpus::Submission> kept;
  for (const corpus::Submission& s : parseable.submissions)
    if (!anomalous.count(s.student_id)) kept.push_back(s);
  corpus::Corpus retained = corpus::Corpus::from_submissions(std::move(kept), parseable.problems);

  json anomalous_json = json::array();
  for (const std::string& s : anomalous) anomalous_json.push_back(s);
  std::ofstream(artifact_path(config, "anomalous.json")) << anomalous_json.dump(2) << "\n";

  corpus::save_corpus(retained, artifact_path(config, "retained.jsonl"));
  corpus::SplitResult splits = corpus::split_dataset(retained, config.split);
  corpus::save_corpus(splits.train, artifact_path(config, "train.jsonl"));
  corpus::save_corpus(splits.val, artifact_path(config, "val.jsonl"));
  corpus::save_corpus(splits.test, artifact_path(config, "test.jsonl"));

  // Subtree dump for the retained corpus.
  pattern::ExtractOptions opts;
  opts.max_nodes = config.max_nodes;
  opts.max_subtrees = config.max_subtrees;
  std::ofstream patterns(artifact_path(config, "patterns.jsonl"));
  for (const corpus::Submission& s : retained.submissions) {
    auto seq = pattern::extract_subtrees(minilang::parse(s.code), opts);
    for (const pattern::Subtree& st : seq.subtrees) {
      json j;
      j["submission"] = submission_ref_json({s.student_id, s.problem_id, s.attempt});
      j["position"] = st.position;
      j["canon"] = st.canon;
      j["canon_normalized"] = pattern::serialize_subtree(pattern::normalize_tree(st.tree));
      patterns << j.dump() << "\n";
    }
  }
}

struct EncodedCorpus {
  std::vector<pattern::SubtreeSequence> sequences;
  std::vector<pattern::EncodedSequence> encodings;
  nn::Vec labels;
};

EncodedCorpus encode_corpus(const corpus::Corpus& corpus, const pattern::Vocab& vocab,
                            const PipelineConfig& config) {
  pattern::ExtractOptions opts;
  opts.max_nodes = config.max_nodes;
  opts.max_subtrees = config.max_subtrees;
  EncodedCorpus out;
  out.labels.resize(static_cast<Eigen::Index>(corpus.submissions.size()));
  for (std::size_t i = 0; i < corpus.submissions.size(); ++i) {
    const corpus::Submission& s = corpus.submissions[i];
    pattern::SubtreeSequence seq = pattern::extract_subtrees(minilang::parse(s.code), opts);
    seq.submission = {s.student_id, s.problem_id, s.attempt};
    out.encodings.push_back(
        pattern::encode_sequence(seq, vocab, config.max_subtrees, config.max_nodes));
    out.sequences.push_back(std::move(seq));
    out.labels(static_cast<Eigen::Index>(i)) = s.correct ? 1.0 : 0.0;
  }
  return out;
}

void write_history_csv(const fs::path& path, const std::vector<double>& train,
                       const std::vector<double>& val) {
  std::ofstream out(path);
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < train.size(); ++e)
    out << e + 1 << "," << fmt_float(train[e]) << "," << fmt_float(val[e]) << "\n";
}

void stage_train_sann(const PipelineConfig& config) {
  corpus::Corpus train = corpus::load_corpus(artifact_path(config, "train.jsonl"), false);
  corpus::Corpus val = corpus::load_corpus(artifact_path(config, "val.jsonl"), false);

  pattern::ExtractOptions opts;
  opts.max_nodes = config.max_nodes;
  opts.max_subtrees = config.max_subtrees;
  std::vector<pattern::SubtreeSequence> train_seqs;
  for (const corpus::Submission& s : train.submissions)
    train_seqs.push_back(pattern::extract_subtrees(minilang::parse(s.code), opts));
  pattern::Vocab vocab = pattern::build_vocab(train_seqs);
  vocab.save(artifact_path(config, "vocab.json").string());

  EncodedCorpus enc_train = encode_corpus(train, vocab, config);
  EncodedCorpus enc_val = encode_corpus(val, vocab, config);

  sann::TrainHistory history;
  sann::SannModel model =
      sann::train_sann(enc_train.encodings, enc_train.labels, enc_val.encodings, enc_val.labels,
                       vocab.node_size(), vocab.subtree_size(), config.sann, &history);
  model.save(artifact_path(config, "sann.ckpt").string());
  write_history_csv(artifact_path(config, "sann_history.csv"), history.train_loss, history.val_loss);
}

sann::SannModel load_sann(const PipelineConfig& config, const pattern::Vocab& vocab) {
  Rng rng(0);
  sann::SannModel model(vocab.node_size(), vocab.subtree_size(), config.sann, rng);
  model.load(artifact_path(config, "sann.ckpt").string());
  return model;
}

vae::VaeModel load_vae(const PipelineConfig& config, const pattern::Vocab& vocab) {
  Rng rng(0);
  vae::VaeModel model(vocab.node_size(), vocab.subtree_size(), config.vae, rng);
  model.load(artifact_path(config, "vae.ckpt").string());
  return model;
}

void stage_extract(const PipelineConfig& config) {
  corpus::Corpus retained = corpus::load_corpus(artifact_path(config, "retained.jsonl"), false);
  pattern::Vocab vocab = pattern::Vocab::load(artifact_path(config, "vocab.json").string());
  sann::SannModel model = load_sann(config, vocab);

  EncodedCorpus enc = encode_corpus(retained, vocab, config);
  std::ofstream attention(artifact_path(config, "attention.jsonl"));
  std::ofstream important(artifact_path(config, "important.jsonl"));
  for (std::size_t i = 0; i < enc.sequences.size(); ++i) {
    const pattern::SubtreeSequence& seq = enc.sequences[i];
    bool correct = enc.labels(static_cast<Eigen::Index>(i)) > 0.5;
    sann::AttentionResult res = model.forward(enc.encodings[i]);

    json row;
    row["submission"] = submission_ref_json(seq.submission);
    row["label"] = correct;
    row["slots"] = json::array();
    for (int s = 0; s < enc.encodings[i].len; ++s) {
      const pattern::Subtree& st = seq.subtrees[static_cast<std::size_t>(s)];
      json slot;
      slot["position"] = st.position;
      slot["canon_normalized"] = pattern::serialize_subtree(pattern::normalize_tree(st.tree));
      slot["weight"] = res.weights[static_cast<std::size_t>(s)];
      row["slots"].push_back(std::move(slot));
    }
    attention << row.dump() << "\n";

    for (const sann::ImportantRecord& rec : sann::extract_important(
             seq, enc.encodings[i], correct, model, config.sann.attention_threshold)) {
      json j;
      j["submission"] = submission_ref_json(rec.submission);
      j["position"] = rec.position;
      j["canon_normalized"] = rec.canon_normalized;
      j["weight"] = rec.weight;
      j["label"] = rec.label_correct ? "correct" : "incorrect";
      important << j.dump() << "\n";
    }
  }
}

vae::VaeSample sample_from_row(const AttentionRow& row, const pattern::EncodedSequence* enc,
                               double threshold) {
  vae::VaeSample sample;
  sample.enc = enc;
  sample.weights = row.weights;
  sample.targets = Eigen::VectorXi::Zero(enc->len);
  sample.important.assign(static_cast<std::size_t>(enc->len), 0);
  for (int s = 0; s < enc->len; ++s) {
    if (row.weights[static_cast<std::size_t>(s)] > threshold) {
      sample.targets(s) = enc->subtree_ids(s);
      sample.important[static_cast<std::size_t>(s)] = 1;
    }
  }
  return sample;
}

void stage_train_vae(const PipelineConfig& config) {
  pattern::Vocab vocab = pattern::Vocab::load(artifact_path(config, "vocab.json").string());
  std::vector<AttentionRow> rows = read_attention(artifact_path(config, "attention.jsonl"));

  std::vector<pattern::EncodedSequence> encodings;
  std::vector<AttentionRow> correct_rows;
  for (AttentionRow& row : rows) {
    if (!row.correct) continue;
    pattern::SubtreeSequence seq = sequence_from_row(row);
    encodings.push_back(pattern::encode_sequence(seq, vocab, row.canons.size(), config.max_nodes));
    correct_rows.push_back(std::move(row));
  }

  std::vector<vae::VaeSample> samples;
  std::vector<std::uint8_t> labels;
  for (std::size_t i = 0; i < correct_rows.size(); ++i) {
    samples.push_back(sample_from_row(correct_rows[i], &encodings[i],
                                      config.sann.attention_threshold));
    labels.push_back(1);
  }

  vae::VaeHistory history;
  vae::VaeModel model = vae::train_vae(samples, labels, vocab.node_size(), vocab.subtree_size(),
                                       config.vae, &history);
  model.save(artifact_path(config, "vae.ckpt").string());

  std::ofstream out(artifact_path(config, "vae_history.csv"));
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < history.train_loss.size(); ++e)
    out << e + 1 << "," << fmt_float(history.train_loss[e]) << "," << fmt_float(history.val_loss[e])
        << "\n";
  out << "# val_masked_accuracy=" << fmt_float(history.val_masked_accuracy)
      << " test_masked_accuracy=" << fmt_float(history.test_masked_accuracy) << "\n";
}

struct ImportantLine {
  pattern::SubmissionRef submission;
  std::size_t position = 0;
  std::string canon;
  double weight = 0.0;
  bool correct = false;
};

std::vector<ImportantLine> read_important(const fs::path& path) {
  std::vector<ImportantLine> lines;
  for (const json& j : read_jsonl(path)) {
    ImportantLine line;
    line.submission = submission_ref_from(j.at("submission"));
    line.position = j.at("position").get<std::size_t>();
    line.canon = j.at("canon_normalized").get<std::string>();
    line.weight = j.at("weight").get<double>();
    line.correct = j.at("label").get<std::string>() == "correct";
    lines.push_back(std::move(line));
  }
  return lines;
}

void stage_cluster(const PipelineConfig& config) {
  pattern::Vocab vocab = pattern::Vocab::load(artifact_path(config, "vocab.json").string());
  vae::VaeModel model = load_vae(config, vocab);
  std::vector<ImportantLine> lines = read_important(artifact_path(config, "important.jsonl"));

  kc::CanonLatentCache latents(model, vocab, config.max_nodes);
  std::vector<nn::Vec> points;
  std::vector<const ImportantLine*> correct_stream;
  std::ofstream latents_out(artifact_path(config, "latents.jsonl"));
  for (const ImportantLine& line : lines) {
    if (!line.correct) continue;
    const nn::Vec& mu = latents.mu(line.canon);
    points.push_back(mu);
    correct_stream.push_back(&line);
    json j;
    j["submission"] = submission_ref_json(line.submission);
    j["position"] = line.position;
    j["mu"] = std::vector<double>(mu.data(), mu.data() + mu.size());
    latents_out << j.dump() << "\n";
  }
  if (points.empty()) throw ValidationError("cluster: no correct-stream subtrees to cluster");

  // Count distinct latent points to bound k.
  int k = config.kc_k;
  if (k <= 0) {
    std::vector<int> candidates;
    std::set<std::string> distinct;
    for (const ImportantLine* line : correct_stream) distinct.insert(line->canon);
    int max_k = std::min<int>(config.kc_candidates_max, static_cast<int>(distinct.size()));
    for (int c = config.kc_candidates_min; c <= max_k; ++c) candidates.push_back(c);
    if (candidates.size() < 3)
      throw ValidationError("cluster: elbow selection needs at least 3 feasible candidates");
    k = kc::elbow_select_k(points, candidates, config.kc_seed);
  }

  kc::KmeansResult result = kc::kmeans_fit(points, k, config.kc_seed);

  // Cluster membership and representatives.
  std::vector<kc::KcCluster> clusters(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    clusters[static_cast<std::size_t>(c)].kc_id = c;
    clusters[static_cast<std::size_t>(c)].centroid = result.centroids[static_cast<std::size_t>(c)];
  }
  std::vector<double> best_dist(static_cast<std::size_t>(k),
                                std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < points.size(); ++i) {
    int c = result.assignments[i];
    auto& cluster = clusters[static_cast<std::size_t>(c)];
    cluster.members[correct_stream[i]->canon] += 1;
    double d = (points[i] - cluster.centroid).squaredNorm();
    if (d < best_dist[static_cast<std::size_t>(c)]) {
      best_dist[static_cast<std::size_t>(c)] = d;
      cluster.representative_canon = correct_stream[i]->canon;
    }
  }

  json out = json::array();
  for (const kc::KcCluster& cluster : clusters) {
    json members = json::array();
    // Sorted by count (desc) then canon for a stable artifact.
    std::vector<std::pair<int, std::string>> ordered;
    for (const auto& [canon, count] : cluster.members) ordered.push_back({-count, canon});
    std::sort(ordered.begin(), ordered.end());
    int member_count = 0;
    for (const auto& [neg, canon] : ordered) {
      member_count += -neg;
      if (members.size() < 5) members.push_back({{"canon", canon}, {"count", -neg}});
    }
    json j;
    j["kc_id"] = cluster.kc_id;
    j["centroid"] =
        std::vector<double>(cluster.centroid.data(), cluster.centroid.data() + cluster.centroid.size());
    j["representative_canon"] = cluster.representative_canon;
    j["member_count"] = member_count;
    j["top_members"] = members;
    out.push_back(std::move(j));
  }
  std::ofstream(artifact_path(config, "kcs.json")) << out.dump(2) << "\n";
}

std::vector<nn::Vec> load_centroids(const PipelineConfig& config) {
  std::ifstream in(artifact_path(config, "kcs.json"));
  if (!in) throw StageError("missing artifact: " + artifact_path(config, "kcs.json").string());
  json j;
  in >> j;
  std::vector<nn::Vec> centroids;
  for (const json& cluster : j) {
    std::vector<double> c = cluster.at("centroid").get<std::vector<double>>();
    centroids.push_back(Eigen::Map<nn::Vec>(c.data(), static_cast<Eigen::Index>(c.size())));
  }
  return centroids;
}

void stage_outcomes(const PipelineConfig& config) {
  pattern::Vocab vocab = pattern::Vocab::load(artifact_path(config, "vocab.json").string());
  vae::VaeModel model = load_vae(config, vocab);
  std::vector<nn::Vec> centroids = load_centroids(config);
  std::vector<AttentionRow> rows = read_attention(artifact_path(config, "attention.jsonl"));

  std::vector<kc::SubmissionSubtrees> inputs;
  inputs.reserve(rows.size());
  for (const AttentionRow& row : rows)
    inputs.push_back({row.submission, row.correct, row.positions, row.canons, row.weights});
  std::vector<kc::KcOutcome> outcomes =
      kc::build_outcomes(inputs, model, vocab, centroids, config.sann.attention_threshold,
                         config.max_nodes, config.kc_direct_assignment);

  std::ofstream out(artifact_path(config, "outcomes.jsonl"));
  for (const kc::KcOutcome& o : outcomes) {
    json j;
    j["submission"] = submission_ref_json(o.submission);
    j["kc_id"] = o.kc_id;
    j["status"] = o.status == kc::KcStatus::Correct ? "correct" : "incorrect";
    j["source"] = o.source == kc::KcSource::CorrectPattern ? "correct-pattern" : "error-pattern";
    out << j.dump() << "\n";
  }

  // Per-submission KC bit vectors.
  int k_total = static_cast<int>(centroids.size());
  std::ofstream vectors(artifact_path(config, "vectors.csv"));
  vectors << "student_id,problem_id,attempt";
  for (int k = 0; k < k_total; ++k) vectors << ",kc" << k;
  vectors << "\n";
  for (const AttentionRow& row : rows) {
    kc::KcVector v = kc::kc_vector(row.submission, outcomes, k_total);
    vectors << row.submission.student_id << "," << row.submission.problem_id << ","
            << row.submission.attempt;
    for (int k = 0; k < k_total; ++k) vectors << "," << int(v.bits[static_cast<std::size_t>(k)]);
    vectors << "\n";
  }
}

std::vector<kc::KcOutcome> read_outcomes(const fs::path& path) {
  std::vector<kc::KcOutcome> outcomes;
  for (const json& j : read_jsonl(path)) {
    kc::KcOutcome o;
    o.submission = submission_ref_from(j.at("submission"));
    o.kc_id = j.at("kc_id").get<int>();
    o.status = j.at("status").get<std::string>() == "correct" ? kc::KcStatus::Correct
                                                              : kc::KcStatus::Incorrect;
    o.source = j.at("source").get<std::string>() == "correct-pattern"
                   ? kc::KcSource::CorrectPattern
                   : kc::KcSource::ErrorPattern;
    outcomes.push_back(std::move(o));
  }
  return outcomes;
}

void stage_curves(const PipelineConfig& config) {
  corpus::Corpus retained = corpus::load_corpus(artifact_path(config, "retained.jsonl"), false);
  std::vector<kc::KcOutcome> outcomes = read_outcomes(artifact_path(config, "outcomes.jsonl"));
  std::vector<analytics::LearningCurve> curves = analytics::build_learning_curves(outcomes, retained);
  for (analytics::LearningCurve& curve : curves)
    curve.category = analytics::classify_curve(curve, config.curves);
  analytics::write_curves_csv(artifact_path(config, "curves.csv").string(), curves);
  if (config.curves_svg)
    analytics::write_curves_svg(artifact_path(config, "curves.svg").string(), curves);
}

// First-attempt AFM observations under a KC labeling: for each first attempt,
// the exercised KC ids and the student's count of prior first-attempt
// opportunities on each.
std::vector<analytics::AfmObservation> afm_observations(
    const corpus::Corpus& corpus,
    const std::map<pattern::SubmissionRef, std::set<int>>& kcs_of_submission) {
  std::vector<analytics::AfmObservation> observations;
  std::map<std::string, std::map<int, int>> seen;  // student -> kc -> count
  for (const corpus::Submission& s : corpus.submissions) {
    if (s.attempt != 1) continue;
    pattern::SubmissionRef ref{s.student_id, s.problem_id, s.attempt};
    auto it = kcs_of_submission.find(ref);
    if (it == kcs_of_submission.end() || it->second.empty()) continue;
    analytics::AfmObservation obs;
    obs.correct = s.correct;
    for (int k : it->second) {
      int& count = seen[s.student_id][k];
      obs.kcs.push_back({k, count});
      count += 1;
    }
    observations.push_back(std::move(obs));
  }
  return observations;
}

void stage_afm(const PipelineConfig& config) {
  corpus::Corpus retained = corpus::load_corpus(artifact_path(config, "retained.jsonl"), false);
  std::vector<kc::KcOutcome> outcomes = read_outcomes(artifact_path(config, "outcomes.jsonl"));

  // Pattern-KC labeling from the discovered outcomes.
  std::map<pattern::SubmissionRef, std::set<int>> pattern_kcs;
  int max_kc = -1;
  for (const kc::KcOutcome& o : outcomes) {
    pattern_kcs[o.submission].insert(o.kc_id);
    max_kc = std::max(max_kc, o.kc_id);
  }

  // Single-KC: every first attempt exercises the one KC.
  std::map<pattern::SubmissionRef, std::set<int>> single_kcs;
  // Item-KC: the problem is the KC.
  std::map<pattern::SubmissionRef, std::set<int>> item_kcs;
  for (const corpus::Submission& s : retained.submissions) {
    if (s.attempt != 1) continue;
    pattern::SubmissionRef ref{s.student_id, s.problem_id, s.attempt};
    single_kcs[ref].insert(0);
    item_kcs[ref].insert(retained.problem_index(s.problem_id));
  }

  std::vector<std::pair<std::string, analytics::AfmFit>> fits;
  fits.push_back({"single-kc", analytics::fit_afm(afm_observations(retained, single_kcs), 1,
                                                  config.afm)});
  fits.push_back({"item-kc",
                  analytics::fit_afm(afm_observations(retained, item_kcs),
                                     static_cast<int>(retained.problems.size()), config.afm)});
  fits.push_back({"pattern-kc",
                  analytics::fit_afm(afm_observations(retained, pattern_kcs), max_kc + 1, config.afm)});
  analytics::write_afm_csv(artifact_path(config, "afm.csv").string(), fits);
}

std::map<pattern::SubmissionRef, std::vector<std::uint8_t>> read_vectors(const fs::path& path,
                                                                         int* k_out) {
  std::ifstream in(path);
  if (!in) throw StageError("missing artifact: " + path.string());
  std::map<pattern::SubmissionRef, std::vector<std::uint8_t>> bits;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("vectors.csv is empty");
  int k = 0;
  for (char c : line) k += c == ',' ? 1 : 0;
  k -= 2;  // student_id, problem_id, attempt
  if (k_out) *k_out = k;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string student, problem, attempt, bit;
    std::getline(ss, student, ',');
    std::getline(ss, problem, ',');
    std::getline(ss, attempt, ',');
    std::vector<std::uint8_t> v;
    while (std::getline(ss, bit, ',')) v.push_back(bit == "1" ? 1 : 0);
    bits[{student, problem, std::stoi(attempt)}] = std::move(v);
  }
  return bits;
}

void stage_dkt(const PipelineConfig& config) {
  corpus::Corpus retained = corpus::load_corpus(artifact_path(config, "retained.jsonl"), false);
  int k_total = 0;
  auto bits = read_vectors(artifact_path(config, "vectors.csv"), &k_total);

  // Per-student step sequences in corpus order.
  std::map<std::string, analytics::DktSequence> by_student;
  for (const corpus::Submission& s : retained.submissions) {
    analytics::DktSequence& seq = by_student[s.student_id];
    seq.student_id = s.student_id;
    analytics::DktStep step;
    step.q = retained.problem_index(s.problem_id);
    step.a = s.correct ? 1 : 0;
    auto it = bits.find({s.student_id, s.problem_id, s.attempt});
    if (it != bits.end()) step.kc_bits = it->second;
    seq.steps.push_back(std::move(step));
  }

  // Student-level split.
  std::vector<std::string> students = retained.students;
  Rng rng(config.dkt_split_seed);
  rng.shuffle(students);
  auto n = students.size();
  auto n_train = static_cast<std::size_t>(config.dkt_train_frac * static_cast<double>(n) + 0.5);
  auto n_val = static_cast<std::size_t>(config.dkt_val_frac * static_cast<double>(n) + 0.5);
  n_train = std::min(n_train, n);
  n_val = std::min(n_val, n - n_train);
  std::vector<analytics::DktSequence> train, val, test;
  for (std::size_t i = 0; i < n; ++i) {
    const analytics::DktSequence& seq = by_student.at(students[i]);
    if (i < n_train)
      train.push_back(seq);
    else if (i < n_train + n_val)
      val.push_back(seq);
    else
      test.push_back(seq);
  }

  int m = static_cast<int>(retained.problems.size());
  json metrics = json::array();
  std::ofstream events_out(artifact_path(config, "dkt_events.csv"));
  events_out << "model,next_problem,score,label\n";
  for (bool with_kc : {false, true}) {
    analytics::DktHistory history;
    analytics::DktModel model =
        analytics::train_dkt(train, val, m, k_total, with_kc, config.dkt, &history);
    std::vector<analytics::DktEvent> events = analytics::dkt_events(model, test);
    for (const analytics::DktEvent& e : events)
      events_out << (with_kc ? "kc-dkt" : "dkt") << "," << e.next_problem << ","
                 << fmt_float(e.score) << "," << e.label << "\n";

    json entry;
    entry["model"] = with_kc ? "kc-dkt" : "dkt";
    std::vector<double> scores;
    std::vector<int> labels;
    for (const analytics::DktEvent& e : events) {
      scores.push_back(e.score);
      labels.push_back(e.label);
    }
    entry["overall_auc"] = analytics::evaluate_auc(scores, labels);

    json per_assignment = json::object();
    for (int a = 1; a <= 5; ++a) {
      std::vector<double> s;
      std::vector<int> l;
      for (const analytics::DktEvent& e : events) {
        const std::string& pid = retained.problems[static_cast<std::size_t>(e.next_problem)].problem_id;
        if (retained.assignment_of(pid) != a) continue;
        s.push_back(e.score);
        l.push_back(e.label);
      }
      std::string key = "A" + std::to_string(a);
      try {
        per_assignment[key] = analytics::evaluate_auc(s, l);
      } catch (const ValidationError&) {
        per_assignment[key] = nullptr;  // degenerate labels in this assignment
      }
    }
    entry["per_assignment_auc"] = per_assignment;
    metrics.push_back(std::move(entry));
  }
  std::ofstream(artifact_path(config, "dkt_metrics.json")) << metrics.dump(2) << "\n";
}

}  // namespace

namespace detail {
void run_report(const PipelineConfig& config);
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"synth",     "ingest",  "train-sann", "extract",
                                                 "train-vae", "cluster", "outcomes",   "curves",
                                                 "afm",       "dkt",     "report"};
  return names;
}

std::filesystem::path artifact_path(const PipelineConfig& config, const std::string& name) {
  return fs::path(config.workdir) / name;
}

void run_stage(const std::string& stage, const PipelineConfig& config, bool force) {
  auto outputs = kStageOutputs.find(stage);
  auto inputs = kStageInputs.find(stage);
  if (outputs == kStageOutputs.end() || inputs == kStageInputs.end())
    throw ConfigError("unknown stage: " + stage);

  fs::create_directories(config.workdir);

  for (const std::string& input : inputs->second) {
    fs::path path = artifact_path(config, input);
    if (!fs::exists(path))
      throw StageError("stage '" + stage + "' needs missing artifact " + path.string() +
                       " (run its producing stage first)");
  }

  if (!force) {
    bool up_to_date = true;
    for (const std::string& output : outputs->second) {
      if (output == "curves.svg" && !config.curves_svg) continue;
      up_to_date = up_to_date && fs::exists(artifact_path(config, output));
    }
    if (up_to_date) {
      std::cout << "stage " << stage << ": up to date\n";
      return;
    }
  }

  std::cout << "stage " << stage << ": running\n";
  if (stage == "synth")
    stage_synth(config);
  else if (stage == "ingest")
    stage_ingest(config);
  else if (stage == "train-sann")
    stage_train_sann(config);
  else if (stage == "extract")
    stage_extract(config);
  else if (stage == "train-vae")
    stage_train_vae(config);
  else if (stage == "cluster")
    stage_cluster(config);
  else if (stage == "outcomes")
    stage_outcomes(config);
  else if (stage == "curves")
    stage_curves(config);
  else if (stage == "afm")
    stage_afm(config);
  else if (stage == "dkt")
    stage_dkt(config);
  else if (stage == "report")
    detail::run_report(config);
}

void run_all(const PipelineConfig& config, bool force) {
  for (const std::string& stage : stage_names()) {
    if (stage == "synth" && !config.corpus_path.empty()) continue;
    run_stage(stage, config, force);
  }
}

}  // namespace codekc::pipeline
