#pragma once

// Orientation error, 3D component errors and KITTI-style average precision.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "egoyaw/geometry.hpp"

namespace egoyaw {

struct MatchCriteria {
  double iou_2d_match = 0.5;      // component-error matching
  double iou_3d_positive = 0.7;   // AP true-positive threshold (all modes)

  void validate() const;
};

enum class Difficulty { kEasy, kModerate, kHard };

struct DifficultyLimits {
  double min_height_px;
  int max_occlusion;
  double max_truncation;
};

/// Public KITTI definitions: 40/25/25 px, occlusion 0/1/2, truncation 0.15/0.30/0.50.
DifficultyLimits difficulty_limits(Difficulty d);
const char* difficulty_name(Difficulty d);

/// In-memory KITTI object label.
struct LabeledObject {
  std::string type = "Car";
  double truncated = 0.0;
  int occluded = 0;
  Angle alpha;
  Box2D box2d;
  Box3D box3d;
  std::optional<double> score;
};

bool in_difficulty(const LabeledObject& gt, Difficulty d);

/// Median of a nonempty sample (mean of the two middle values for even sizes).
double median(std::vector<double> values);

/// Median wrapped absolute error in degrees. Throws std::invalid_argument
/// for empty or mismatched inputs.
double median_angle_error_deg(std::span<const Angle> predictions, std::span<const Angle> truths);

/// Predictions and ground truth of one image.
struct FrameObjects {
  std::vector<LabeledObject> pred;
  std::vector<LabeledObject> gt;
};

struct MatchedPair {
  std::size_t frame;
  std::size_t pred;
  std::size_t gt;
  double iou;
};

/// One-to-one greedy matching by descending 2D IoU, pairs below `min_iou`
/// discarded. Ties resolve by (pred, gt) index.
std::vector<MatchedPair> greedy_match_2d(const FrameObjects& frame, std::size_t frame_index,
                                         double min_iou);

struct ComponentErrors {
  std::size_t matched = 0;
  std::size_t unmatched_pred = 0;
  std::size_t unmatched_gt = 0;
  // Medians of absolute errors; empty when nothing matched.
  std::optional<double> h, w, l;       // m
  std::optional<double> x, y, z;       // m
  std::optional<double> yaw_deg;
};

ComponentErrors component_errors(std::span<const FrameObjects> frames, const MatchCriteria& crit);

enum class ApMode { k2D, kBev, k3D };
enum class ApInterpolation { k40Point, k11Point };

const char* ap_mode_name(ApMode m);

struct ApResult {
  double ap = 0.0;
  std::size_t gt_count = 0;        // ground truth in the difficulty bin
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
};

/// Predictions ranked by descending score (ties: frame, then input order) are
/// greedily matched to the unmatched ground truth of their frame with the
/// highest IoU in `mode`, at IoU >= crit.iou_3d_positive. Ground truth outside
/// the difficulty bin is ignored, as are predictions matched to it and
/// unmatched predictions shorter than the bin's minimum height.
ApResult average_precision(std::span<const FrameObjects> frames, ApMode mode, Difficulty bin,
                           const MatchCriteria& crit,
                           ApInterpolation interp = ApInterpolation::k40Point);

/// Interpolated AP of a ranked list of hit/miss flags against `gt_count`
/// positives.
double interpolated_ap(const std::vector<bool>& ranked_hits, std::size_t gt_count,
                       ApInterpolation interp);

}  // namespace egoyaw
