#include "egoyaw/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace egoyaw {

void MatchCriteria::validate() const {
  const auto ok = [](double t) { return t > 0.0 && t <= 1.0; };
  if (!ok(iou_2d_match) || !ok(iou_3d_positive)) {
    throw std::invalid_argument("match thresholds must lie in (0, 1]");
  }
}

DifficultyLimits difficulty_limits(Difficulty d) {
  switch (d) {
    case Difficulty::kEasy:
      return {40.0, 0, 0.15};
    case Difficulty::kModerate:
      return {25.0, 1, 0.30};
    case Difficulty::kHard:
      return {25.0, 2, 0.50};
  }
  throw std::invalid_argument("unknown difficulty");
}

const char* difficulty_name(Difficulty d) {
  switch (d) {
    case Difficulty::kEasy:
      return "easy";
    case Difficulty::kModerate:
      return "moderate";
    case Difficulty::kHard:
      return "hard";
  }
  return "?";
}

const char* ap_mode_name(ApMode m) {
  switch (m) {
    case ApMode::k2D:
      return "2d";
    case ApMode::kBev:
      return "bev";
    case ApMode::k3D:
      return "3d";
  }
  return "?";
}

bool in_difficulty(const LabeledObject& gt, Difficulty d) {
  const auto lim = difficulty_limits(d);
  return gt.box2d.height() >= lim.min_height_px && gt.occluded <= lim.max_occlusion &&
         gt.truncated <= lim.max_truncation;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty sample");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double median_angle_error_deg(std::span<const Angle> predictions, std::span<const Angle> truths) {
  if (predictions.empty()) throw std::invalid_argument("median_angle_error: empty input");
  if (predictions.size() != truths.size()) {
    throw std::invalid_argument("median_angle_error: predictions and truths differ in length");
  }
  std::vector<double> err(predictions.size());
  for (std::size_t i = 0; i < err.size(); ++i) {
    err[i] = rad2deg(std::abs((predictions[i] - truths[i]).rad()));
  }
  return median(std::move(err));
}

std::vector<MatchedPair> greedy_match_2d(const FrameObjects& frame, std::size_t frame_index,
                                         double min_iou) {
  std::vector<MatchedPair> candidates;
  for (std::size_t p = 0; p < frame.pred.size(); ++p) {
    for (std::size_t g = 0; g < frame.gt.size(); ++g) {
      const double iou = iou_2d(frame.pred[p].box2d, frame.gt[g].box2d);
      if (iou >= min_iou) candidates.push_back({frame_index, p, g, iou});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const MatchedPair& a, const MatchedPair& b) { return a.iou > b.iou; });
  std::vector<bool> pred_used(frame.pred.size(), false);
  std::vector<bool> gt_used(frame.gt.size(), false);
  std::vector<MatchedPair> out;
  for (const auto& c : candidates) {
    if (pred_used[c.pred] || gt_used[c.gt]) continue;
    pred_used[c.pred] = true;
    gt_used[c.gt] = true;
    out.push_back(c);
  }
  return out;
}

ComponentErrors component_errors(std::span<const FrameObjects> frames, const MatchCriteria& crit) {
  crit.validate();
  ComponentErrors out;
  std::vector<double> eh, ew, el, ex, ey, ez, eyaw;
  std::size_t n_pred = 0;
  std::size_t n_gt = 0;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    n_pred += frames[f].pred.size();
    n_gt += frames[f].gt.size();
    for (const auto& m : greedy_match_2d(frames[f], f, crit.iou_2d_match)) {
      const Box3D& p = frames[f].pred[m.pred].box3d;
      const Box3D& g = frames[f].gt[m.gt].box3d;
      eh.push_back(std::abs(p.size.h - g.size.h));
      ew.push_back(std::abs(p.size.w - g.size.w));
      el.push_back(std::abs(p.size.l - g.size.l));
      ex.push_back(std::abs(p.center.x - g.center.x));
      ey.push_back(std::abs(p.center.y - g.center.y));
      ez.push_back(std::abs(p.center.z - g.center.z));
      eyaw.push_back(rad2deg(std::abs((p.yaw - g.yaw).rad())));
    }
  }
  out.matched = eh.size();
  out.unmatched_pred = n_pred - out.matched;
  out.unmatched_gt = n_gt - out.matched;
  if (out.matched > 0) {
    out.h = median(eh);
    out.w = median(ew);
    out.l = median(el);
    out.x = median(ex);
    out.y = median(ey);
    out.z = median(ez);
    out.yaw_deg = median(eyaw);
  }
  return out;
}

double interpolated_ap(const std::vector<bool>& ranked_hits, std::size_t gt_count,
                       ApInterpolation interp) {
  if (gt_count == 0 || ranked_hits.empty()) return 0.0;
  std::vector<double> recall;
  std::vector<double> precision;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < ranked_hits.size(); ++k) {
    if (ranked_hits[k]) ++tp;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(gt_count));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
  }
  // Running maximum from the right: best precision at recall >= r.
  for (std::size_t k = precision.size() - 1; k > 0; --k) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  const auto precision_at = [&](double r) {
    constexpr double kTol = 1e-12;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r - kTol);
    return it == recall.end() ? 0.0 : precision[static_cast<std::size_t>(it - recall.begin())];
  };
  double sum = 0.0;
  if (interp == ApInterpolation::k40Point) {
    for (int i = 1; i <= 40; ++i) sum += precision_at(i / 40.0);
    return sum / 40.0;
  }
  for (int i = 0; i <= 10; ++i) sum += precision_at(i / 10.0);
  return sum / 11.0;
}

ApResult average_precision(std::span<const FrameObjects> frames, ApMode mode, Difficulty bin,
                           const MatchCriteria& crit, ApInterpolation interp) {
  crit.validate();
  const auto limits = difficulty_limits(bin);

  struct Ranked {
    double score;
    std::size_t frame;
    std::size_t index;
  };
  std::vector<Ranked> ranked;
  std::vector<std::vector<bool>> gt_ignored(frames.size());
  ApResult out;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    for (const auto& g : frames[f].gt) {
      const bool ignore = !in_difficulty(g, bin);
      gt_ignored[f].push_back(ignore);
      if (!ignore) ++out.gt_count;
    }
    for (std::size_t p = 0; p < frames[f].pred.size(); ++p) {
      ranked.push_back({frames[f].pred[p].score.value_or(1.0), f, p});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

  const auto overlap = [mode](const LabeledObject& a, const LabeledObject& b) {
    switch (mode) {
      case ApMode::k2D:
        return iou_2d(a.box2d, b.box2d);
      case ApMode::kBev:
        return iou_bev(a.box3d, b.box3d);
      case ApMode::k3D:
        return iou_3d(a.box3d, b.box3d);
    }
    return 0.0;
  };

  std::vector<std::vector<bool>> gt_taken(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) gt_taken[f].assign(frames[f].gt.size(), false);

  std::vector<bool> hits;
  for (const auto& r : ranked) {
    const LabeledObject& pred = frames[r.frame].pred[r.index];
    double best = -1.0;
    std::size_t best_gt = 0;
    for (std::size_t g = 0; g < frames[r.frame].gt.size(); ++g) {
      if (gt_taken[r.frame][g]) continue;
      const double iou = overlap(pred, frames[r.frame].gt[g]);
      if (iou >= crit.iou_3d_positive && iou > best) {
        best = iou;
        best_gt = g;
      }
    }
    if (best >= 0.0) {
      gt_taken[r.frame][best_gt] = true;
      if (gt_ignored[r.frame][best_gt]) continue;
      hits.push_back(true);
      ++out.true_positives;
    } else {
      if (pred.box2d.height() < limits.min_height_px) continue;
      hits.push_back(false);
      ++out.false_positives;
    }
  }
  out.ap = interpolated_ap(hits, out.gt_count, interp);
  return out;
}

}  // namespace egoyaw
