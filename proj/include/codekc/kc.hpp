#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "codekc/corpus.hpp"
#include "codekc/nn/ops.hpp"
#include "codekc/pattern.hpp"
#include "codekc/sann.hpp"
#include "codekc/vae.hpp"

namespace codekc::kc {

using nn::Mat;
using nn::Vec;

struct KmeansResult {
  std::vector<Vec> centroids;
  std::vector<int> assignments;
  double inertia = 0.0;
  // Inertia after each Lloyd iteration; non-increasing by construction.
  std::vector<double> inertia_trace;
};

// Lloyd's algorithm with k-means++ seeding. Ties assign to the lowest
// centroid index; empty clusters keep their previous centroid. Stops when
// the largest centroid movement drops below tol or after max_iter rounds.
// Runs n_init seed-derived restarts and keeps the lowest-inertia fit.
KmeansResult kmeans_fit(std::span<const Vec> points, int k, std::uint64_t seed, int max_iter = 300,
                        double tol = 1e-6, int n_init = 10);

// The elbow rule on a fitted inertia profile: the interior candidate with the
// largest discrete second difference of inertia; ties go to the smaller k.
int elbow_pick(std::span<const int> k_candidates, std::span<const double> inertia);

// Fits every candidate and applies elbow_pick.
int elbow_select_k(std::span<const Vec> points, std::span<const int> k_candidates,
                   std::uint64_t seed);

// Nearest centroid by Euclidean distance; ties -> lowest id.
int assign_subtree(const Vec& latent, std::span<const Vec> centroids);

struct KcCluster {
  int kc_id = 0;
  Vec centroid;
  // Normalized canon -> member count (correct-stream members).
  std::map<std::string, int> members;
  std::string representative_canon;  // member whose latent is nearest the centroid
};

enum class KcStatus { Correct, Incorrect };
enum class KcSource { CorrectPattern, ErrorPattern };

struct KcOutcome {
  pattern::SubmissionRef submission;
  int kc_id = 0;
  KcStatus status = KcStatus::Correct;
  KcSource source = KcSource::CorrectPattern;
};

struct KcVector {
  pattern::SubmissionRef submission;
  std::vector<std::uint8_t> bits;  // length K
};

// One submission's extracted subtrees with their attention weights.
struct SubmissionSubtrees {
  pattern::SubmissionRef submission;
  bool correct = false;
  std::vector<std::size_t> positions;
  std::vector<std::string> canons;  // normalized
  std::vector<double> weights;
};

// Eval-mode latent (mu) of a normalized canon encoded as a length-1 sequence
// with attention weight 1; memoized by canon.
class CanonLatentCache {
 public:
  CanonLatentCache(const vae::VaeModel& model, const pattern::Vocab& vocab, std::size_t max_nodes)
      : model_(model), vocab_(vocab), max_nodes_(max_nodes) {}

  const Vec& mu(const std::string& canon);

 private:
  const vae::VaeModel& model_;
  const pattern::Vocab& vocab_;
  std::size_t max_nodes_;
  std::map<std::string, Vec> cache_;
};

// High-attention subtrees of correct submissions map by their own latent
// (Correct); those of incorrect submissions map through the predicted
// representative pattern (Incorrect). direct_assignment skips the
// representative step and uses the erroneous subtree's own latent.
std::vector<KcOutcome> build_outcomes(std::span<const SubmissionSubtrees> rows,
                                      const vae::VaeModel& model, const pattern::Vocab& vocab,
                                      std::span<const Vec> centroids, double threshold,
                                      std::size_t max_nodes, bool direct_assignment = false);

// bit k = 1 iff some Correct outcome exists on k and no Incorrect one does.
KcVector kc_vector(const pattern::SubmissionRef& submission, std::span<const KcOutcome> outcomes,
                   int k_total);

struct KcStats {
  double kcs_per_problem_mean = 0.0, kcs_per_problem_std = 0.0;
  double kcs_per_submission_mean = 0.0, kcs_per_submission_std = 0.0;
  double problems_per_kc_mean = 0.0, problems_per_kc_std = 0.0;
};

KcStats kc_stats(std::span<const KcOutcome> outcomes);

}  // namespace codekc::kc
