#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "codekc/analytics/afm.hpp"
#include "codekc/analytics/curves.hpp"
#include "codekc/analytics/dkt.hpp"
#include "codekc/corpus.hpp"
#include "codekc/sann.hpp"
#include "codekc/synth.hpp"
#include "codekc/vae.hpp"

namespace codekc {

// All pipeline knobs with their defaults, loadable from a TOML-style config
// file ([section] + key = value). Unknown sections or keys are rejected.
struct PipelineConfig {
  std::string workdir = "work";
  std::string corpus_path;  // empty -> synthetic corpus in the workdir

  synth::SynthConfig synth;
  corpus::AnomalyOptions anomaly;
  corpus::SplitSpec split{0.8, 0.1, 0.1, corpus::SplitMode::SubmissionStratified, 7};

  std::size_t max_nodes = 100;     // per-subtree node cap
  std::size_t max_subtrees = 100;  // per-sequence subtree cap

  sann::SannConfig sann;
  vae::VaeConfig vae;

  int kc_k = 50;  // 0 -> elbow selection over the candidate range
  int kc_candidates_min = 2;
  int kc_candidates_max = 12;
  std::uint64_t kc_seed = 17;
  bool kc_direct_assignment = false;  // map error subtrees by their own latent

  analytics::CurveClassifyOptions curves;
  bool curves_svg = false;

  analytics::AfmOptions afm;

  analytics::DktConfig dkt;
  double dkt_train_frac = 0.8;
  double dkt_val_frac = 0.1;
  double dkt_test_frac = 0.1;
  std::uint64_t dkt_split_seed = 23;

  static PipelineConfig load(const std::filesystem::path& path);

  // Re-derives every stage seed from one master seed (the --seed flag).
  void apply_master_seed(std::uint64_t seed);
};

}  // namespace codekc
