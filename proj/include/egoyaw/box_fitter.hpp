#pragma once

// Depth fitting of a fixed-size, yaw-oriented 3D box to a 2D detection:
// the box center slides along the detection ray and the depth maximizing the
// 2D IoU between the detection and the projected box is kept.

#include <cstddef>
#include <vector>

#include "egoyaw/angle_estimator.hpp"
#include "egoyaw/geometry.hpp"
#include "egoyaw/nelder_mead.hpp"

namespace egoyaw {

/// Median vehicle dimensions; defaults are placeholders to be confirmed
/// against the dataset at hand.
struct VehicleSizePrior {
  double h = 1.53;
  double w = 1.63;
  double l = 3.88;

  BoxSize size() const { return {h, w, l}; }
  void validate() const;
};

struct FitConfig {
  double z_init = 30.0;
  double z_min = 0.5;
  double z_max = 300.0;
  SimplexConfig simplex;      // 1-D simplex {z_init, z_init + 5 m}
  double min_iou = 0.1;       // below this the fit is reported as not converged
  std::size_t sweep_points = 600;  // log-spaced fallback sweep when stuck at IoU 0

  void validate() const;
};

struct FitResult {
  Box3D box;
  double achieved_iou = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Box of size `prior` and yaw `yaw_global` centered on the ray through the
/// center of `det`, at depth Z.
Box3D box_from_depth(const Box2D& det, Angle yaw_global, double z, const VehicleSizePrior& prior,
                     const CameraIntrinsics& cam);

/// 2D IoU between `det` and the projection of box_from_depth(..., z), or -1
/// when the box cannot be projected.
double depth_iou(const Box2D& det, Angle yaw_global, double z, const VehicleSizePrior& prior,
                 const CameraIntrinsics& cam);

/// Throws FitError when the box cannot be projected at any probed depth.
FitResult fit_box3d(const Box2D& det, Angle yaw_global, const VehicleSizePrior& prior,
                    const CameraIntrinsics& cam, const FitConfig& cfg = {});

struct Detection2D {
  Box2D box;
  double score = 1.0;
  CropDescriptor crop;
};

struct FittedDetection {
  std::size_t source = 0;  // index into the input detections
  Box2D box2d;
  Box3D box3d;
  Angle local;             // estimated local angle
  double score = 1.0;
  double iou = 0.0;
};

struct DetectionFitReport {
  std::vector<FittedDetection> boxes;
  std::size_t failed = 0;        // unfittable (projection impossible, estimator error)
  std::size_t not_converged = 0; // fitted but IoU below FitConfig::min_iou
};

/// theta_g = ray_angle(det) + estimator(crop), then fit_box3d per detection.
/// Failed and non-converged detections are dropped and counted.
DetectionFitReport detections_to_boxes(const std::vector<Detection2D>& dets,
                                       const AngleEstimator& estimator,
                                       const VehicleSizePrior& prior, const CameraIntrinsics& cam,
                                       const FitConfig& cfg = {}, unsigned threads = 1);

}  // namespace egoyaw
