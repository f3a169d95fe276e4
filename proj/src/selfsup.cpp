#include "egoyaw/selfsup.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace egoyaw {

namespace {

constexpr double kZeroTolerance = 1e-12;

int sign_with_tolerance(double x) {
  if (x > kZeroTolerance) return 1;
  if (x < -kZeroTolerance) return -1;
  return 0;
}

// Correction pushes `direction` on a prediction whose truth residual is
// `residual`; it is wrong when it moves the prediction away from its truth.
bool moves_away(int direction, double residual) {
  const int r = sign_with_tolerance(residual);
  return r == 0 ? direction != 0 : direction != r;
}

IndexSet iota_set(std::size_t n) {
  IndexSet s(n);
  std::iota(s.begin(), s.end(), std::size_t{0});
  return s;
}

}  // namespace

void Thresholds::validate() const {
  if (!(t_p >= 1.0)) throw std::invalid_argument("pruning threshold t_p must be >= 1");
  if (!(t_r > 0.0)) throw std::invalid_argument("removal threshold t_r must be > 0");
}

Angle slam_global_delta(Angle slam_i, Angle slam_j) { return slam_i - slam_j; }

AngleSequences build_sequences(const ObservationTrack& track, const AngleEstimator& rough) {
  if (track.frames.empty()) throw std::invalid_argument("build_sequences: empty track");
  AngleSequences seq;
  seq.s.reserve(track.size());
  seq.r.reserve(track.size());
  seq.d.reserve(track.size());
  for (std::size_t k = 0; k < track.size(); ++k) {
    const TrackFrame& f = track.frames[k];
    const Angle s = -f.slam_yaw;
    const Angle r = global_from_local(rough.predict(track.crop(k)), ray_angle(f.box, f.cam));
    seq.s.push_back(s);
    seq.r.push_back(r);
    seq.d.push_back(angle_diff(r, s).rad());
  }
  return seq;
}

std::vector<double> inconsistency_scores(std::span<const double> d, const IndexSet& S) {
  if (S.size() < 2) {
    throw std::invalid_argument("inconsistency_scores: need at least 2 indices, got " +
                                std::to_string(S.size()));
  }
  std::vector<double> scores(S.size(), 0.0);
  for (std::size_t a = 0; a < S.size(); ++a) {
    double sum = 0.0;
    for (std::size_t b = 0; b < S.size(); ++b) sum += circ_dist(d[S[b]], d[S[a]]);
    scores[a] = sum;
  }
  return scores;
}

std::vector<IndexSet> prune_trace(std::span<const double> d, double t_p) {
  std::vector<IndexSet> trace{iota_set(d.size())};
  while (trace.back().size() > 2) {
    const IndexSet& S = trace.back();
    const auto scores = inconsistency_scores(d, S);
    // max_element/min_element return the first extremum: lowest index wins.
    const auto i_max = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    const auto i_min = static_cast<std::size_t>(std::min_element(scores.begin(), scores.end()) - scores.begin());
    const double hi = scores[i_max];
    const double lo = scores[i_min];
    bool prune = false;
    if (lo == 0.0) {
      prune = hi > 0.0;
    } else {
      prune = hi / lo > t_p;
    }
    if (!prune) break;
    IndexSet next;
    next.reserve(S.size() - 1);
    for (std::size_t a = 0; a < S.size(); ++a) {
      if (a != i_max) next.push_back(S[a]);
    }
    trace.push_back(std::move(next));
  }
  return trace;
}

IndexSet prune_sequence(std::span<const double> d, double t_p) {
  if (d.size() < 2) return iota_set(d.size());
  return prune_trace(d, t_p).back();
}

IndexSet most_consistent(std::span<const double> d, const IndexSet& S, std::size_t count) {
  if (S.size() <= count) return S;
  const auto scores = inconsistency_scores(d, S);
  std::vector<std::size_t> order(S.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  IndexSet out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(S[order[k]]);
  std::sort(out.begin(), out.end());
  return out;
}

bool should_remove(std::span<const double> d, const IndexSet& kept, double t_r) {
  if (kept.size() < 3) return true;
  const IndexSet s3 = most_consistent(d, kept, 3);
  double sum = 0.0;
  for (std::size_t i : s3) {
    for (std::size_t j : s3) sum += circ_dist(d[j], d[i]);
  }
  return sum > 6.0 * t_r;
}

Angle circular_mean(std::span<const double> d, const IndexSet& S) {
  double sx = 0.0;
  double sy = 0.0;
  for (std::size_t i : S) {
    sx += std::cos(d[i]);
    sy += std::sin(d[i]);
  }
  return Angle(std::atan2(sy, sx));
}

BiasEstimate estimate_bias(const AngleSequences& seq, const Thresholds& th) {
  th.validate();
  const std::span<const double> d(seq.d);
  if (d.empty()) throw std::invalid_argument("estimate_bias: empty sequence");

  BiasEstimate est;
  if (d.size() < 2) {
    est.kept = iota_set(d.size());
    est.scores.assign(d.size(), 0.0);
    est.b_hat = circular_mean(d, est.kept);
    est.removed = true;
    return est;
  }

  const auto trace = prune_trace(d, th.t_p);
  est.kept = trace.back();
  est.scores = inconsistency_scores(d, est.kept);
  est.b_hat = circular_mean(d, est.kept);

  if (d.size() < 3) {
    est.removed = true;
    return est;
  }
  // Pruning may run down to two entries; the removal test then judges the
  // three-entry set visited on the way there.
  const auto three = std::find_if(trace.begin(), trace.end(),
                                  [](const IndexSet& s) { return s.size() == 3; });
  const IndexSet& judged = est.kept.size() >= 3 ? est.kept : *three;
  est.consistency_set = most_consistent(d, judged, 3);
  est.removed = should_remove(d, judged, th.t_r);
  return est;
}

SelfSupTargets compute_targets(const ObservationTrack& track, const BiasEstimate& est,
                               const AngleSequences& seq) {
  if (seq.size() != track.size()) {
    throw std::invalid_argument("compute_targets: sequence length does not match track");
  }
  SelfSupTargets out;
  out.track_id = track.track_id;
  out.frames.reserve(track.size());
  for (std::size_t k = 0; k < track.size(); ++k) {
    const TrackFrame& f = track.frames[k];
    const Angle global = seq.s[k] + est.b_hat;
    out.frames.push_back({f.frame, f.timestamp, local_from_global(global, ray_angle(f.box, f.cam)),
                          est.removed ? 0.0 : 1.0});
  }
  return out;
}

SiameseStats siamese_gradient_counts(std::span<const SiamesePair> pairs) {
  SiameseStats stats;
  for (const auto& p : pairs) {
    const double true_delta = (p.second.truth - p.first.truth).rad();
    const double pred_delta = (p.second.predicted - p.first.predicted).rad();
    const int push = sign_with_tolerance(wrap_radians(true_delta - pred_delta));
    if (push == 0) continue;
    // Growing the predicted difference raises the second prediction and
    // lowers the first.
    const double residual_first = (p.first.truth - p.first.predicted).rad();
    const double residual_second = (p.second.truth - p.second.predicted).rad();
    stats.corrections += 2;
    if (moves_away(-push, residual_first)) ++stats.wrong;
    if (moves_away(push, residual_second)) ++stats.wrong;
  }
  return stats;
}

}  // namespace egoyaw
