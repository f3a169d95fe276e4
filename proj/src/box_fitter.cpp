#include "egoyaw/box_fitter.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "egoyaw/errors.hpp"
#include "egoyaw/parallel.hpp"

namespace egoyaw {

void VehicleSizePrior::validate() const {
  if (!(h > 0.0 && w > 0.0 && l > 0.0)) {
    throw std::invalid_argument("vehicle size prior must be positive");
  }
}

void FitConfig::validate() const {
  if (!(z_min > 0.0) || !(z_max > z_min)) throw std::invalid_argument("invalid depth bounds");
  if (z_init < z_min || z_init > z_max) throw std::invalid_argument("z_init outside depth bounds");
  if (sweep_points < 2) throw std::invalid_argument("sweep_points must be >= 2");
}

Box3D box_from_depth(const Box2D& det, Angle yaw_global, double z, const VehicleSizePrior& prior,
                     const CameraIntrinsics& cam) {
  if (!(z > 0.0)) throw std::invalid_argument("box_from_depth: depth must be positive");
  const Vec3 center{(det.center_u() - cam.cx()) * z / cam.fx(), (det.center_v() - cam.cy()) * z / cam.fy(),
                    z};
  return {center, prior.size(), yaw_global};
}

double depth_iou(const Box2D& det, Angle yaw_global, double z, const VehicleSizePrior& prior,
                 const CameraIntrinsics& cam) {
  try {
    return iou_2d(det, project_box3d(box_from_depth(det, yaw_global, z, prior, cam), cam));
  } catch (const ProjectionError&) {
    return -1.0;
  }
}

FitResult fit_box3d(const Box2D& det, Angle yaw_global, const VehicleSizePrior& prior,
                    const CameraIntrinsics& cam, const FitConfig& cfg) {
  if (!det.valid()) throw std::invalid_argument("fit_box3d: degenerate detection box");
  prior.validate();
  cfg.validate();

  bool any_projectable = false;
  const auto objective = [&](std::span<const double> x) {
    const double z = x[0];
    if (!(z >= cfg.z_min && z <= cfg.z_max)) return std::numeric_limits<double>::infinity();
    const double iou = depth_iou(det, yaw_global, z, prior, cam);
    if (iou < 0.0) return std::numeric_limits<double>::infinity();
    any_projectable = true;
    return -iou;
  };

  // Start from z_init; if its simplex is not finite, fall back to the sweep.
  std::optional<NelderMeadResult> nm;
  try {
    nm = nelder_mead(objective, {cfg.z_init}, cfg.simplex);
  } catch (const std::invalid_argument&) {
  }

  std::size_t iterations = nm ? nm->iterations : 0;
  if (!nm || -nm->value <= 0.0) {
    // Flat IoU = 0 landscape: probe a log-spaced sweep for a foothold.
    const double ratio = std::log(cfg.z_max / cfg.z_min);
    double best_z = cfg.z_init;
    double best_iou = nm ? -nm->value : -1.0;
    double spacing = cfg.simplex.initial_offset;
    for (std::size_t k = 0; k < cfg.sweep_points; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(cfg.sweep_points - 1);
      const double z = cfg.z_min * std::exp(ratio * t);
      const double iou = -objective(std::span<const double>(&z, 1));
      if (iou > best_iou) {
        best_iou = iou;
        best_z = z;
        spacing = z * (std::exp(ratio / static_cast<double>(cfg.sweep_points - 1)) - 1.0);
      }
    }
    if (!any_projectable) {
      throw FitError("fit_box3d: box cannot be projected at any depth in bounds");
    }
    if (best_iou > 0.0) {
      SimplexConfig local = cfg.simplex;
      local.initial_offset = std::min(spacing, cfg.z_max - best_z);
      if (local.initial_offset <= 0.0) local.initial_offset = -spacing;
      try {
        auto refined = nelder_mead(objective, {best_z}, local);
        iterations += refined.iterations;
        nm = std::move(refined);
      } catch (const std::invalid_argument&) {
        nm = NelderMeadResult{{best_z}, -best_iou, 0, false};
      }
    } else if (!nm) {
      nm = NelderMeadResult{{best_z}, best_iou < 0.0 ? 0.0 : -best_iou, 0, false};
    }
  }

  FitResult out;
  const double z = nm->x[0];
  out.box = box_from_depth(det, yaw_global, z, prior, cam);
  out.achieved_iou = std::max(0.0, depth_iou(det, yaw_global, z, prior, cam));
  out.iterations = iterations;
  out.converged = nm->converged && out.achieved_iou >= cfg.min_iou;
  return out;
}

DetectionFitReport detections_to_boxes(const std::vector<Detection2D>& dets,
                                       const AngleEstimator& estimator,
                                       const VehicleSizePrior& prior, const CameraIntrinsics& cam,
                                       const FitConfig& cfg, unsigned threads) {
  struct Slot {
    std::optional<FittedDetection> fitted;
    bool failed = false;
  };
  std::vector<Slot> slots(dets.size());
  parallel_for(dets.size(), threads, [&](std::size_t i) {
    const Detection2D& det = dets[i];
    try {
      const Angle local = estimator.predict(det.crop);
      const Angle yaw = global_from_local(local, ray_angle(det.box, cam));
      const FitResult fit = fit_box3d(det.box, yaw, prior, cam, cfg);
      if (fit.converged) {
        slots[i].fitted = FittedDetection{i, det.box, fit.box, local, det.score, fit.achieved_iou};
      }
    } catch (const std::exception&) {
      slots[i].failed = true;
    }
  });

  DetectionFitReport report;
  for (auto& s : slots) {
    if (s.failed) {
      ++report.failed;
    } else if (!s.fitted) {
      ++report.not_converged;
    } else {
      report.boxes.push_back(*s.fitted);
    }
  }
  return report;
}

}  // namespace egoyaw
