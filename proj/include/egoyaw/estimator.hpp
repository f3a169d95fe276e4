#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "egoyaw/angle_estimator.hpp"
#include "egoyaw/selfsup.hpp"

namespace egoyaw {

inline constexpr int kEstimatorFormatVersion = 1;

struct SmoothL1Config {
  double beta = deg2rad(10.0);  // half-width of the quadratic region (rad)

  void validate() const;
};

/// e^2 / (2 beta) for |e| <= beta, |e| - beta / 2 otherwise.
double smooth_l1(double residual, const SmoothL1Config& cfg);

/// Returns the feature unchanged; exact when the appearance descriptor is
/// undistorted.
class IdentityEstimator final : public AngleEstimator {
 public:
  Angle predict(const CropDescriptor& crop) const override { return crop.feature; }
};

/// Precomputed per-detection outputs of an external model, looked up by
/// (track_id, frame).
class TabulatedEstimator final : public AngleEstimator {
 public:
  using Key = std::pair<std::int64_t, std::int64_t>;

  TabulatedEstimator() = default;
  explicit TabulatedEstimator(std::map<Key, Angle> table) : table_(std::move(table)) {}

  /// Uses every frame's rough_local value; frames without one are skipped.
  static TabulatedEstimator from_rough_estimates(std::span<const ObservationTrack> tracks);

  /// Throws std::out_of_range for unknown detections.
  Angle predict(const CropDescriptor& crop) const override;

  std::size_t size() const { return table_.size(); }

 private:
  std::map<Key, Angle> table_;
};

/// Piecewise-constant regressor over K equal feature bins covering (-pi, pi].
/// Bin k holds features in (-pi + k w, -pi + (k + 1) w], w = 2 pi / K.
class BinnedEstimator final : public AngleEstimator {
 public:
  BinnedEstimator(std::vector<Angle> predictions, std::vector<std::size_t> counts);

  Angle predict(const CropDescriptor& crop) const override;

  std::size_t bins() const { return predictions_.size(); }
  std::size_t bin_of(Angle feature) const;
  double lower_edge(std::size_t k) const;
  double upper_edge(std::size_t k) const;
  Angle prediction(std::size_t k) const { return predictions_.at(k); }
  std::size_t count(std::size_t k) const { return counts_.at(k); }

 private:
  std::vector<Angle> predictions_;
  std::vector<std::size_t> counts_;
};

struct WeightedSample {
  Angle feature;
  Angle target;
  double weight = 1.0;
};

/// Minimizer over the circle of sum_k w_k smooth_l1(wrap(theta - t_k)):
/// grid bracketing followed by golden-section refinement to 1e-4 rad.
Angle minimize_smooth_l1(std::span<const WeightedSample> samples, const SmoothL1Config& cfg);

/// Fits each bin to its weighted targets; empty bins are interpolated
/// circularly between the nearest fitted neighbours. Throws FitError when no
/// sample has positive weight.
BinnedEstimator fit_binned(std::span<const WeightedSample> samples, std::size_t bins,
                           const SmoothL1Config& cfg);

/// Pairs every weighted target with the feature of its detection.
std::vector<WeightedSample> training_samples(const ObservationTrack& track,
                                             const SelfSupTargets& targets);

void write_estimator(std::ostream& out, const BinnedEstimator& est);
void write_identity_estimator(std::ostream& out);

/// Reads a versioned estimator file (binned or identity). Throws IoError.
std::unique_ptr<AngleEstimator> read_estimator(std::istream& in);

struct CycleConfig {
  std::size_t cycles = 5;
  Thresholds thresholds;
  std::size_t bins = 72;
  SmoothL1Config loss;
  double validation_fraction = 0.2;
  std::uint64_t split_seed = 0;
  unsigned threads = 1;
};

struct CycleRecord {
  BinnedEstimator model;
  std::optional<double> median_error_deg;  // on the validation split
  std::size_t tracks_used = 0;
  std::size_t tracks_removed = 0;
  std::size_t entries_pruned = 0;
  std::size_t targets = 0;
};

struct CycleResult {
  std::optional<double> initial_error_deg;  // M_0 on the validation split
  std::vector<CycleRecord> cycles;
  std::vector<std::size_t> train_tracks;
  std::vector<std::size_t> validation_tracks;
  std::optional<std::string> abort_reason;  // set when a cycle could not fit

  bool aborted() const { return abort_reason.has_value(); }
};

/// Deterministic train/validation split: {train, validation} indices into
/// `track_ids`. Each track goes to validation with probability
/// `validation_fraction`, decided by a hash of (seed, id), so a track's side
/// does not change when other tracks are added or removed.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_tracks(
    std::span<const std::int64_t> track_ids, double validation_fraction, std::uint64_t seed);

/// Median |prediction - truth| in degrees over frames of `tracks` that carry
/// ground truth; nullopt when none do.
std::optional<double> validation_error_deg(std::span<const ObservationTrack> tracks,
                                           std::span<const std::size_t> which,
                                           const AngleEstimator& est);

/// Cycle i builds sequences with M_{i-1}, estimates biases, computes
/// targets on the training tracks and fits M_i. Throws std::invalid_argument
/// for cycles == 0. When every training track is removed in some cycle the
/// completed cycles are returned with abort_reason set.
/// Called after each completed cycle with its 1-based index.
using CycleCallback = std::function<void(std::size_t, const CycleRecord&)>;

CycleResult run_cycles(std::span<const ObservationTrack> tracks, const AngleEstimator& m0,
                       const CycleConfig& cfg, const CycleCallback& on_cycle = {});

}  // namespace egoyaw
