#include "codekc/kc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "codekc/errors.hpp"

namespace codekc::kc {

namespace {

std::size_t count_distinct(std::span<const Vec> points) {
  std::vector<std::vector<double>> seen;
  seen.reserve(points.size());
  for (const Vec& p : points) {
    std::vector<double> v(p.data(), p.data() + p.size());
    seen.push_back(std::move(v));
  }
  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  return seen.size();
}

double sq_dist(const Vec& a, const Vec& b) { return (a - b).squaredNorm(); }

std::vector<Vec> kmeanspp_seed(std::span<const Vec> points, int k, Rng& rng) {
  std::vector<Vec> centroids;
  centroids.reserve(static_cast<std::size_t>(k));
  centroids.push_back(points[rng.integer(points.size())]);
  std::vector<double> d2(points.size());
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = sq_dist(points[i], centroids[0]);
      for (std::size_t c = 1; c < centroids.size(); ++c)
        best = std::min(best, sq_dist(points[i], centroids[c]));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      // All remaining mass sits on existing centroids; spread over distinct
      // points not yet chosen.
      for (const Vec& p : points) {
        bool taken = false;
        for (const Vec& c : centroids) taken = taken || (p - c).norm() == 0.0;
        if (!taken) {
          centroids.push_back(p);
          break;
        }
      }
      continue;
    }
    double target = rng.uniform() * total;
    double cum = 0.0;
    std::size_t chosen = points.size();
    for (std::size_t i = 0; i < points.size(); ++i) {
      cum += d2[i];
      if (cum >= target && d2[i] > 0.0) {
        chosen = i;
        break;
      }
    }
    if (chosen == points.size()) {  // numeric edge: take the last positive-weight point
      for (std::size_t i = points.size(); i-- > 0;) {
        if (d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    }
    centroids.push_back(points[chosen]);
  }
  return centroids;
}

}  // namespace

namespace {

KmeansResult kmeans_single(std::span<const Vec> points, int k, Rng& rng, int max_iter, double tol) {
  KmeansResult result;
  result.centroids = kmeanspp_seed(points, k, rng);
  result.assignments.assign(points.size(), 0);

  for (int iter = 0; iter < max_iter; ++iter) {
    // Assignment step: nearest centroid, ties to lowest index.
    double inertia = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      int best = 0;
      double best_d = sq_dist(points[i], result.centroids[0]);
      for (int c = 1; c < k; ++c) {
        double d = sq_dist(points[i], result.centroids[static_cast<std::size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      result.assignments[i] = best;
      inertia += best_d;
    }
    result.inertia = inertia;
    result.inertia_trace.push_back(inertia);

    // Update step.
    std::vector<Vec> next(static_cast<std::size_t>(k));
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int c = 0; c < k; ++c) next[static_cast<std::size_t>(c)] = Vec::Zero(points[0].size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      next[static_cast<std::size_t>(result.assignments[i])] += points[i];
      counts[static_cast<std::size_t>(result.assignments[i])] += 1;
    }
    double movement = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) continue;  // keep the old centroid
      next[static_cast<std::size_t>(c)] /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
      movement = std::max(movement, (next[static_cast<std::size_t>(c)] -
                                     result.centroids[static_cast<std::size_t>(c)])
                                        .norm());
      result.centroids[static_cast<std::size_t>(c)] = next[static_cast<std::size_t>(c)];
    }
    if (movement < tol) break;
  }

  // Final assignment against the settled centroids.
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    int best = 0;
    double best_d = sq_dist(points[i], result.centroids[0]);
    for (int c = 1; c < k; ++c) {
      double d = sq_dist(points[i], result.centroids[static_cast<std::size_t>(c)]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    result.assignments[i] = best;
    inertia += best_d;
  }
  result.inertia = inertia;
  result.inertia_trace.push_back(inertia);
  return result;
}

}  // namespace

KmeansResult kmeans_fit(std::span<const Vec> points, int k, std::uint64_t seed, int max_iter,
                        double tol, int n_init) {
  if (points.empty()) throw ValidationError("kmeans_fit: no points");
  if (k < 1) throw ValidationError("kmeans_fit: k must be positive");
  if (n_init < 1) throw ValidationError("kmeans_fit: n_init must be positive");
  std::size_t distinct = count_distinct(points);
  if (static_cast<std::size_t>(k) > distinct)
    throw ValidationError("kmeans_fit: k exceeds the number of distinct points (" +
                          std::to_string(distinct) + ")");

  Rng rng(seed);
  KmeansResult best;
  for (int run = 0; run < n_init; ++run) {
    KmeansResult result = kmeans_single(points, k, rng, max_iter, tol);
    if (run == 0 || result.inertia < best.inertia) best = std::move(result);
  }
  return best;
}

int elbow_pick(std::span<const int> k_candidates, std::span<const double> inertia) {
  if (k_candidates.size() < 3)
    throw ValidationError("elbow: need at least 3 candidate values");
  if (k_candidates.size() != inertia.size())
    throw ValidationError("elbow: candidate/inertia length mismatch");
  for (std::size_t i = 1; i < k_candidates.size(); ++i)
    if (k_candidates[i] <= k_candidates[i - 1])
      throw ValidationError("elbow: candidates must be strictly ascending");

  int best_k = k_candidates[1];
  double best_curvature = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < k_candidates.size(); ++i) {
    double curvature = (inertia[i - 1] - inertia[i]) - (inertia[i] - inertia[i + 1]);
    if (curvature > best_curvature + 1e-12) {
      best_curvature = curvature;
      best_k = k_candidates[i];
    }
  }
  return best_k;
}

int elbow_select_k(std::span<const Vec> points, std::span<const int> k_candidates,
                   std::uint64_t seed) {
  if (k_candidates.size() < 3)
    throw ValidationError("elbow_select_k: need at least 3 candidate values");
  std::vector<double> inertia;
  inertia.reserve(k_candidates.size());
  for (int k : k_candidates) inertia.push_back(kmeans_fit(points, k, seed).inertia);
  return elbow_pick(k_candidates, inertia);
}

int assign_subtree(const Vec& latent, std::span<const Vec> centroids) {
  if (centroids.empty()) throw ValidationError("assign_subtree: no centroids");
  if (latent.size() != centroids[0].size())
    throw ValidationError("assign_subtree: latent dimension mismatch");
  int best = 0;
  double best_d = sq_dist(latent, centroids[0]);
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    double d = sq_dist(latent, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

const Vec& CanonLatentCache::mu(const std::string& canon) {
  auto it = cache_.find(canon);
  if (it != cache_.end()) return it->second;
  pattern::EncodedSequence enc = pattern::encode_canon(canon, vocab_, max_nodes_);
  std::vector<double> weights = {1.0};
  vae::LatentCode code = model_.encode(enc, weights, false, nullptr);
  return cache_.emplace(canon, std::move(code.mu)).first->second;
}

std::vector<KcOutcome> build_outcomes(std::span<const SubmissionSubtrees> rows,
                                      const vae::VaeModel& model, const pattern::Vocab& vocab,
                                      std::span<const Vec> centroids, double threshold,
                                      std::size_t max_nodes, bool direct_assignment) {
  CanonLatentCache latents(model, vocab, max_nodes);
  std::vector<KcOutcome> outcomes;
  for (const SubmissionSubtrees& row : rows) {
    if (row.correct || direct_assignment) {
      KcStatus status = row.correct ? KcStatus::Correct : KcStatus::Incorrect;
      KcSource source = row.correct ? KcSource::CorrectPattern : KcSource::ErrorPattern;
      for (std::size_t s = 0; s < row.canons.size(); ++s) {
        if (row.weights[s] <= threshold) continue;
        int kc_id = assign_subtree(latents.mu(row.canons[s]), centroids);
        outcomes.push_back({row.submission, kc_id, status, source});
      }
    } else {
      pattern::SubtreeSequence seq;
      seq.submission = row.submission;
      for (std::size_t i = 0; i < row.canons.size(); ++i) {
        pattern::Subtree st;
        st.tree = pattern::parse_canon(row.canons[i]);
        st.canon = row.canons[i];
        st.position = row.positions[i];
        seq.subtrees.push_back(std::move(st));
      }
      pattern::EncodedSequence enc =
          pattern::encode_sequence(seq, vocab, row.canons.size(), max_nodes);
      for (const auto& [slot, predicted_id] :
           model.predict_representative(enc, row.weights, threshold)) {
        const std::string& canon = vocab.subtree_key(predicted_id);
        int kc_id = assign_subtree(latents.mu(canon), centroids);
        outcomes.push_back({row.submission, kc_id, KcStatus::Incorrect, KcSource::ErrorPattern});
      }
    }
  }
  return outcomes;
}

KcVector kc_vector(const pattern::SubmissionRef& submission, std::span<const KcOutcome> outcomes,
                   int k_total) {
  KcVector v;
  v.submission = submission;
  v.bits.assign(static_cast<std::size_t>(k_total), 0);
  std::vector<std::uint8_t> has_incorrect(static_cast<std::size_t>(k_total), 0);
  for (const KcOutcome& o : outcomes) {
    if (o.submission != submission) continue;
    if (o.kc_id < 0 || o.kc_id >= k_total)
      throw ValidationError("kc_vector: kc id " + std::to_string(o.kc_id) + " out of range");
    if (o.status == KcStatus::Correct)
      v.bits[static_cast<std::size_t>(o.kc_id)] = 1;
    else
      has_incorrect[static_cast<std::size_t>(o.kc_id)] = 1;
  }
  // An erroneous use contradicts mastery: Incorrect dominates.
  for (int k = 0; k < k_total; ++k)
    if (has_incorrect[static_cast<std::size_t>(k)]) v.bits[static_cast<std::size_t>(k)] = 0;
  return v;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  return {mean, std::sqrt(var)};
}

}  // namespace

KcStats kc_stats(std::span<const KcOutcome> outcomes) {
  std::map<std::string, std::set<int>> kcs_per_problem;
  std::map<pattern::SubmissionRef, std::set<int>> kcs_per_submission;
  std::map<int, std::set<std::string>> problems_per_kc;
  for (const KcOutcome& o : outcomes) {
    kcs_per_problem[o.submission.problem_id].insert(o.kc_id);
    kcs_per_submission[o.submission].insert(o.kc_id);
    problems_per_kc[o.kc_id].insert(o.submission.problem_id);
  }
  auto collect = [](const auto& groups) {
    std::vector<double> sizes;
    for (const auto& [key, values] : groups) sizes.push_back(static_cast<double>(values.size()));
    return sizes;
  };
  KcStats stats;
  std::tie(stats.kcs_per_problem_mean, stats.kcs_per_problem_std) = mean_std(collect(kcs_per_problem));
  std::tie(stats.kcs_per_submission_mean, stats.kcs_per_submission_std) =
      mean_std(collect(kcs_per_submission));
  std::tie(stats.problems_per_kc_mean, stats.problems_per_kc_std) = mean_std(collect(problems_per_kc));
  return stats;
}

}  // namespace codekc::kc
