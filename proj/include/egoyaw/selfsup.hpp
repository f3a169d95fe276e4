#pragma once

// Self-supervised local-angle targets from ego-motion.
//
// For a track of N detections of one vehicle:
//   s_n = -theta_slam(t_n)         global angle from SLAM, up to a bias
//   r_n = ray_n + M(crop_n)        rough global angle from an estimator
//   d_n = wrap(r_n - s_n)
// The bias is estimated from d_n after iterative pruning of inconsistent
// entries; whole tracks whose most consistent entries still disagree are
// removed from training.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "egoyaw/angle_estimator.hpp"
#include "egoyaw/geometry.hpp"
#include "egoyaw/track.hpp"

namespace egoyaw {

/// Sorted 0-based indices into a difference sequence.
using IndexSet = std::vector<std::size_t>;

struct AngleSequences {
  std::vector<Angle> s;
  std::vector<Angle> r;
  std::vector<double> d;

  std::size_t size() const { return d.size(); }
};

struct Thresholds {
  double t_p = 1.0;            // pruning ratio threshold
  double t_r = deg2rad(1.0);   // removal threshold (rad)

  /// Throws std::invalid_argument unless t_p >= 1 and t_r > 0.
  void validate() const;
};

struct BiasEstimate {
  IndexSet kept;
  Angle b_hat;
  bool removed = true;
  std::vector<double> scores;   // I_i over `kept`, aligned with it
  IndexSet consistency_set;     // the three entries judged by the removal test
};

struct SelfSupTarget {
  std::int64_t frame = 0;
  double timestamp = 0.0;
  Angle local;
  double weight = 0.0;
};

struct SelfSupTargets {
  std::int64_t track_id = 0;
  std::vector<SelfSupTarget> frames;
};

/// Observed global-angle change of a stationary vehicle between t_i and t_j:
/// wrap(theta_slam(t_i) - theta_slam(t_j)). The ego turning one way makes a
/// stationary vehicle appear to turn the other way.
Angle slam_global_delta(Angle slam_i, Angle slam_j);

AngleSequences build_sequences(const ObservationTrack& track, const AngleEstimator& rough);

/// I_i = sum_{j in S} circ_dist(d_j, d_i) for each i in S, in the order of S.
/// Throws std::invalid_argument when |S| < 2.
std::vector<double> inconsistency_scores(std::span<const double> d, const IndexSet& S);

/// Every intermediate set visited by pruning, starting at {0..N-1} and ending
/// with the kept set. Ties pick the lowest index for both the most and the
/// least consistent entry.
std::vector<IndexSet> prune_trace(std::span<const double> d, double t_p);

IndexSet prune_sequence(std::span<const double> d, double t_p);

/// The `count` entries of S with the smallest inconsistency (ties: lowest index).
IndexSet most_consistent(std::span<const double> d, const IndexSet& S, std::size_t count);

/// True when the three most consistent entries of `kept` have an ordered-pair
/// distance sum above 6 * t_r, or when fewer than three entries are available.
bool should_remove(std::span<const double> d, const IndexSet& kept, double t_r);

/// Resultant-vector mean of d over S.
Angle circular_mean(std::span<const double> d, const IndexSet& S);

BiasEstimate estimate_bias(const AngleSequences& seq, const Thresholds& th);

/// Per-frame targets wrap(s_n + b_hat) - ray_n; weight 0 for removed tracks.
SelfSupTargets compute_targets(const ObservationTrack& track, const BiasEstimate& est,
                               const AngleSequences& seq);

struct LocalObservation {
  Angle truth;
  Angle predicted;
};

struct SiamesePair {
  LocalObservation first;
  LocalObservation second;
};

struct SiameseStats {
  std::size_t wrong = 0;
  std::size_t corrections = 0;

  double fraction() const {
    return corrections == 0 ? 0.0 : static_cast<double>(wrong) / static_cast<double>(corrections);
  }
};

/// Supervising only the predicted difference of each pair pushes the two
/// predictions in opposite directions. Counts how many of those pushes move
/// a prediction away from its own ground truth.
SiameseStats siamese_gradient_counts(std::span<const SiamesePair> pairs);

inline double siamese_gradient_direction_stats(std::span<const SiamesePair> pairs) {
  return siamese_gradient_counts(pairs).fraction();
}

}  // namespace egoyaw
