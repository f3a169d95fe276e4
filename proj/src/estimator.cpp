#include "egoyaw/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "egoyaw/errors.hpp"
#include "egoyaw/evaluation.hpp"
#include "egoyaw/parallel.hpp"

namespace egoyaw {

namespace {

constexpr std::size_t kSearchGrid = 720;
constexpr double kGoldenTolerance = 1e-4;
const char* const kEstimatorMagic = "egoyaw-estimator";

double summed_loss(std::span<const WeightedSample> samples, const SmoothL1Config& cfg, double theta) {
  double sum = 0.0;
  for (const auto& s : samples) {
    sum += s.weight * smooth_l1(wrap_radians(theta - s.target.rad()), cfg);
  }
  return sum;
}

}  // namespace

void SmoothL1Config::validate() const {
  if (!(beta > 0.0)) throw std::invalid_argument("smooth-L1 beta must be positive");
}

double smooth_l1(double residual, const SmoothL1Config& cfg) {
  const double e = std::abs(residual);
  if (e <= cfg.beta) return e * e / (2.0 * cfg.beta);
  return e - 0.5 * cfg.beta;
}

TabulatedEstimator TabulatedEstimator::from_rough_estimates(std::span<const ObservationTrack> tracks) {
  std::map<Key, Angle> table;
  for (const auto& t : tracks) {
    for (const auto& f : t.frames) {
      if (f.rough_local) table[{t.track_id, f.frame}] = Angle(*f.rough_local);
    }
  }
  return TabulatedEstimator(std::move(table));
}

Angle TabulatedEstimator::predict(const CropDescriptor& crop) const {
  const auto it = table_.find({crop.track_id, crop.frame});
  if (it == table_.end()) {
    throw std::out_of_range("no tabulated estimate for track " + std::to_string(crop.track_id) +
                            " frame " + std::to_string(crop.frame));
  }
  return it->second;
}

BinnedEstimator::BinnedEstimator(std::vector<Angle> predictions, std::vector<std::size_t> counts)
    : predictions_(std::move(predictions)), counts_(std::move(counts)) {
  if (predictions_.size() < 2) throw std::invalid_argument("BinnedEstimator needs at least 2 bins");
  if (counts_.size() != predictions_.size()) {
    throw std::invalid_argument("BinnedEstimator: counts and predictions differ in length");
  }
}

std::size_t BinnedEstimator::bin_of(Angle feature) const {
  const double width = kTwoPi / static_cast<double>(bins());
  const double pos = std::ceil((feature.rad() + kPi) / width) - 1.0;
  return static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins() - 1)));
}

double BinnedEstimator::lower_edge(std::size_t k) const {
  return -kPi + kTwoPi * static_cast<double>(k) / static_cast<double>(bins());
}

double BinnedEstimator::upper_edge(std::size_t k) const { return lower_edge(k + 1); }

Angle BinnedEstimator::predict(const CropDescriptor& crop) const {
  return predictions_[bin_of(crop.feature)];
}

Angle minimize_smooth_l1(std::span<const WeightedSample> samples, const SmoothL1Config& cfg) {
  cfg.validate();
  if (samples.empty()) throw FitError("minimize_smooth_l1: no samples");
  const double step = kTwoPi / static_cast<double>(kSearchGrid);
  double best_theta = -kPi + step;
  double best_value = summed_loss(samples, cfg, best_theta);
  for (std::size_t g = 2; g <= kSearchGrid; ++g) {
    const double theta = -kPi + step * static_cast<double>(g);
    const double value = summed_loss(samples, cfg, theta);
    if (value < best_value) {
      best_value = value;
      best_theta = theta;
    }
  }

  // Golden-section refinement inside the bracketing grid cells.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = best_theta - step;
  double hi = best_theta + step;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = summed_loss(samples, cfg, x1);
  double f2 = summed_loss(samples, cfg, x2);
  while (hi - lo > kGoldenTolerance) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = summed_loss(samples, cfg, x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = summed_loss(samples, cfg, x2);
    }
  }
  const double refined = 0.5 * (lo + hi);
  return Angle(summed_loss(samples, cfg, refined) <= best_value ? refined : best_theta);
}

BinnedEstimator fit_binned(std::span<const WeightedSample> samples, std::size_t bins,
                           const SmoothL1Config& cfg) {
  cfg.validate();
  if (bins < 2) throw std::invalid_argument("fit_binned: need at least 2 bins");

  // Bin assignment is shared with prediction.
  const BinnedEstimator layout(std::vector<Angle>(bins), std::vector<std::size_t>(bins, 0));
  std::vector<std::vector<WeightedSample>> per_bin(bins);
  for (const auto& s : samples) {
    if (s.weight > 0.0) per_bin[layout.bin_of(s.feature)].push_back(s);
  }

  std::vector<Angle> predictions(bins);
  std::vector<std::size_t> counts(bins, 0);
  std::vector<std::size_t> fitted;
  for (std::size_t k = 0; k < bins; ++k) {
    counts[k] = per_bin[k].size();
    if (per_bin[k].empty()) continue;
    predictions[k] = minimize_smooth_l1(per_bin[k], cfg);
    fitted.push_back(k);
  }
  if (fitted.empty()) throw FitError("fit_binned: no targets with positive weight");

  for (std::size_t k = 0; k < bins; ++k) {
    if (counts[k] > 0) continue;
    // Nearest fitted bins on either side, wrapping around the circle.
    std::size_t left = 1;
    while (counts[(k + bins - left) % bins] == 0) ++left;
    std::size_t right = 1;
    while (counts[(k + right) % bins] == 0) ++right;
    const Angle a = predictions[(k + bins - left) % bins];
    const Angle b = predictions[(k + right) % bins];
    const double t = static_cast<double>(left) / static_cast<double>(left + right);
    predictions[k] = Angle(a.rad() + t * (b - a).rad());
  }
  return BinnedEstimator(std::move(predictions), std::move(counts));
}

std::vector<WeightedSample> training_samples(const ObservationTrack& track,
                                             const SelfSupTargets& targets) {
  if (targets.frames.size() != track.size()) {
    throw std::invalid_argument("training_samples: targets do not match track length");
  }
  std::vector<WeightedSample> out;
  for (std::size_t k = 0; k < track.size(); ++k) {
    const auto& t = targets.frames[k];
    if (t.weight <= 0.0) continue;
    out.push_back({track.crop(k).feature, t.local, t.weight});
  }
  return out;
}

void write_estimator(std::ostream& out, const BinnedEstimator& est) {
  out << kEstimatorMagic << ' ' << kEstimatorFormatVersion << '\n';
  out << "kind binned\n";
  out << "bins " << est.bins() << '\n';
  out << "# lower_edge upper_edge prediction count\n";
  out << std::setprecision(17);
  for (std::size_t k = 0; k < est.bins(); ++k) {
    out << est.lower_edge(k) << ' ' << est.upper_edge(k) << ' ' << est.prediction(k).rad() << ' '
        << est.count(k) << '\n';
  }
}

void write_identity_estimator(std::ostream& out) {
  out << kEstimatorMagic << ' ' << kEstimatorFormatVersion << '\n';
  out << "kind identity\n";
}

std::unique_ptr<AngleEstimator> read_estimator(std::istream& in) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    lines.push_back(line);
  }
  const auto fail = [](const std::string& what) -> std::unique_ptr<AngleEstimator> {
    throw IoError("estimator file: " + what);
  };
  if (lines.size() < 2) return fail("missing header");

  std::istringstream header(lines[0]);
  std::string magic;
  int version = 0;
  if (!(header >> magic >> version) || magic != kEstimatorMagic) return fail("bad magic line");
  if (version != kEstimatorFormatVersion) {
    return fail("unsupported version " + std::to_string(version));
  }
  std::istringstream kind_line(lines[1]);
  std::string key;
  std::string kind;
  if (!(kind_line >> key >> kind) || key != "kind") return fail("missing kind");
  if (kind == "identity") return std::make_unique<IdentityEstimator>();
  if (kind != "binned") return fail("unknown kind '" + kind + "'");

  if (lines.size() < 3) return fail("missing bin count");
  std::istringstream bins_line(lines[2]);
  std::size_t bins = 0;
  if (!(bins_line >> key >> bins) || key != "bins" || bins < 2) return fail("bad bin count");
  if (lines.size() != 3 + bins) {
    return fail("expected " + std::to_string(bins) + " bin rows, found " +
                std::to_string(lines.size() - 3));
  }
  std::vector<Angle> predictions;
  std::vector<std::size_t> counts;
  for (std::size_t k = 0; k < bins; ++k) {
    std::istringstream row(lines[3 + k]);
    double lo = 0.0;
    double hi = 0.0;
    double pred = 0.0;
    std::size_t count = 0;
    if (!(row >> lo >> hi >> pred >> count) || !std::isfinite(pred)) {
      return fail("malformed bin row " + std::to_string(k));
    }
    predictions.emplace_back(pred);
    counts.push_back(count);
  }
  return std::make_unique<BinnedEstimator>(std::move(predictions), std::move(counts));
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_tracks(
    std::span<const std::int64_t> track_ids, double validation_fraction, std::uint64_t seed) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("validation fraction must lie in [0, 1)");
  }
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  for (std::size_t i = 0; i < track_ids.size(); ++i) {
    // splitmix64 finalizer over (seed, id); top 53 bits as a uniform draw.
    std::uint64_t z = seed ^ (static_cast<std::uint64_t>(track_ids[i]) + 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    const double u = static_cast<double>(z >> 11) * 0x1.0p-53;
    (u < validation_fraction ? val : train).push_back(i);
  }
  return {std::move(train), std::move(val)};
}

std::optional<double> validation_error_deg(std::span<const ObservationTrack> tracks,
                                           std::span<const std::size_t> which,
                                           const AngleEstimator& est) {
  std::vector<Angle> pred;
  std::vector<Angle> truth;
  for (std::size_t t : which) {
    const auto& track = tracks[t];
    for (std::size_t k = 0; k < track.size(); ++k) {
      if (!track.frames[k].truth_local) continue;
      pred.push_back(est.predict(track.crop(k)));
      truth.emplace_back(*track.frames[k].truth_local);
    }
  }
  if (pred.empty()) return std::nullopt;
  return median_angle_error_deg(pred, truth);
}

CycleResult run_cycles(std::span<const ObservationTrack> tracks, const AngleEstimator& m0,
                       const CycleConfig& cfg, const CycleCallback& on_cycle) {
  if (cfg.cycles == 0) throw std::invalid_argument("run_cycles: cycles must be >= 1");
  cfg.thresholds.validate();
  cfg.loss.validate();

  CycleResult result;
  std::vector<std::int64_t> ids;
  ids.reserve(tracks.size());
  for (const auto& t : tracks) ids.push_back(t.track_id);
  std::tie(result.train_tracks, result.validation_tracks) =
      split_tracks(ids, cfg.validation_fraction, cfg.split_seed);
  result.initial_error_deg = validation_error_deg(tracks, result.validation_tracks, m0);

  // Models are referenced across cycles; no reallocation allowed.
  result.cycles.reserve(cfg.cycles);
  const AngleEstimator* current = &m0;
  for (std::size_t cycle = 1; cycle <= cfg.cycles; ++cycle) {
    struct PerTrack {
      std::vector<WeightedSample> samples;
      bool removed = true;
      std::size_t pruned = 0;
    };
    std::vector<PerTrack> per_track(result.train_tracks.size());
    parallel_for(per_track.size(), cfg.threads, [&](std::size_t i) {
      const ObservationTrack& track = tracks[result.train_tracks[i]];
      const AngleSequences seq = build_sequences(track, *current);
      const BiasEstimate est = estimate_bias(seq, cfg.thresholds);
      per_track[i].removed = est.removed;
      per_track[i].pruned = seq.size() - est.kept.size();
      if (!est.removed) per_track[i].samples = training_samples(track, compute_targets(track, est, seq));
    });

    std::vector<WeightedSample> samples;
    std::size_t used = 0;
    std::size_t removed = 0;
    std::size_t pruned = 0;
    for (auto& p : per_track) {
      pruned += p.pruned;
      if (p.removed) {
        ++removed;
        continue;
      }
      ++used;
      samples.insert(samples.end(), p.samples.begin(), p.samples.end());
    }
    if (samples.empty()) {
      result.abort_reason = "cycle " + std::to_string(cycle) + ": all " +
                            std::to_string(per_track.size()) +
                            " training tracks were removed; no targets to fit";
      return result;
    }

    CycleRecord record{fit_binned(samples, cfg.bins, cfg.loss), std::nullopt, used, removed, pruned,
                       samples.size()};
    record.median_error_deg = validation_error_deg(tracks, result.validation_tracks, record.model);
    result.cycles.push_back(std::move(record));
    current = &result.cycles.back().model;
    if (on_cycle) on_cycle(cycle, result.cycles.back());
  }
  return result;
}

}  // namespace egoyaw
