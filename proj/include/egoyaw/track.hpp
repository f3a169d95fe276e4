#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "egoyaw/geometry.hpp"

namespace egoyaw {

/// Stand-in for a vehicle image crop. `feature` is a scalar appearance
/// descriptor; track_id/frame are pass-through metadata.
struct CropDescriptor {
  Angle feature;
  std::int64_t track_id = -1;
  std::int64_t frame = -1;
};

struct TrackFrame {
  std::int64_t frame = 0;
  double timestamp = 0.0;
  Box2D box;
  Angle slam_yaw;
  CameraIntrinsics cam{1.0, 1.0, 0.0, 0.0};
  std::optional<double> rough_local;   // precomputed rough local angle (rad)
  std::optional<double> crop_feature;  // appearance descriptor (rad)
  std::optional<double> truth_local;   // ground truth local angle, when known
};

/// Detections of one vehicle over time, ordered by strictly increasing timestamp.
struct ObservationTrack {
  std::int64_t track_id = 0;
  std::vector<TrackFrame> frames;

  std::size_t size() const { return frames.size(); }
  CropDescriptor crop(std::size_t k) const;
};

/// Throws std::invalid_argument unless the track is nonempty with strictly
/// increasing timestamps and valid boxes.
void validate_track(const ObservationTrack& track);

}  // namespace egoyaw
