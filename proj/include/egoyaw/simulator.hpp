#pragma once

// Deterministic synthetic driving scenes with full ground truth.
//
// World frame is planar (x, z). An ego (or vehicle) yaw psi uses the same
// handedness as the camera yaw: the ego faces (sin psi, cos psi) and a
// vehicle's length axis points along (cos psi_v, -sin psi_v). A vehicle seen
// from the ego camera therefore has camera yaw wrap(psi_v - psi_ego).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "egoyaw/geometry.hpp"
#include "egoyaw/track.hpp"

namespace egoyaw {

inline constexpr int kScenarioFormatVersion = 1;

enum class MotionKind { kStationary, kStraight, kTurning };

const char* motion_name(MotionKind m);
MotionKind parse_motion(const std::string& name);

struct CameraSpec {
  double fx = 721.5377;
  double fy = 721.5377;
  double cx = 609.5593;
  double cy = 172.854;
  double width = 1242.0;
  double height = 375.0;
  double mount_height = 1.65;  // camera height above the ground plane (m)

  CameraIntrinsics intrinsics() const { return {fx, fy, cx, cy}; }
};

/// Constant-curvature piece of the ego path; curvature 0 is a straight line.
/// Positive curvature increases the ego yaw, i.e. turns toward +X (right).
struct PathSegment {
  double length = 100.0;    // m
  double curvature = 0.0;   // 1/m
  double speed = 10.0;      // m/s
};

/// Vehicle state at time t_ref. Straight movers keep their yaw; turning
/// vehicles change yaw at yaw_rate while moving along their length axis.
struct VehicleSpec {
  std::int64_t id = 0;
  double x = 0.0;
  double z = 0.0;
  Angle yaw;
  BoxSize size{1.53, 1.63, 3.88};
  MotionKind motion = MotionKind::kStationary;
  double speed = 0.0;      // m/s
  double yaw_rate = 0.0;   // rad/s
  double t_ref = 0.0;      // s
};

/// Procedurally placed traffic along the ego path.
struct TrafficSpec {
  std::size_t count = 160;
  double moving_fraction = 0.0;    // straight-moving share of `count`
  double turning_fraction = 0.0;   // turning share of `count`
  double min_lateral = 3.5;        // m from the path centerline
  double max_lateral = 9.0;
  double moving_speed_min = 3.0;
  double moving_speed_max = 12.0;
  double yaw_rate_min = deg2rad(10.0);
  double yaw_rate_max = deg2rad(30.0);
};

struct NoiseSpec {
  double slam_bias = deg2rad(7.0);         // constant per sequence
  double slam_noise_sigma = deg2rad(0.5);
  double slam_drift_rate = 0.0;            // rad/s, linear drift
  // Appearance descriptor: wrap(local + a sin(f local + phase)); a f < 1.
  double appearance_amplitude = deg2rad(10.0);
  double appearance_frequency = 1.0;
  double appearance_phase = 0.5;
  // Rough estimator M_0: local + a sin(f local + phase) + N(0, sigma), or an
  // outlier with probability outlier_rate.
  double estimator_distortion_amplitude = deg2rad(34.0);
  double estimator_distortion_frequency = 2.0;
  double estimator_distortion_phase = 0.3;
  double estimator_noise_sigma = deg2rad(10.0);
  double outlier_rate = 0.15;
  double outlier_magnitude = deg2rad(90.0);  // |offset| uniform in [m/2, m]
  double detection_jitter_px = 1.0;
};

struct VisibilitySpec {
  double min_depth = 1.0;         // every corner at least this far ahead (m)
  double max_depth = 60.0;        // box center depth limit (m)
  double min_height_px = 12.0;
  double max_truncation = 0.5;
  double max_occluded_fraction = 0.8;
};

struct ScenarioConfig {
  int version = kScenarioFormatVersion;
  std::uint64_t seed = 42;
  double frame_rate = 2.0;  // Hz
  CameraSpec camera;
  std::vector<PathSegment> ego_path;
  std::vector<VehicleSpec> vehicles;  // explicit placements, kept as given
  TrafficSpec traffic;
  NoiseSpec noise;
  VisibilitySpec visibility;

  /// Throws std::invalid_argument describing the first problem found.
  void validate() const;
};

/// Built-in default scenario (same as configs/default.yaml).
ScenarioConfig default_scenario();

/// Parses a YAML scenario; unspecified keys keep default_scenario() values.
/// Throws std::invalid_argument on malformed content.
ScenarioConfig parse_scenario(const std::string& yaml_text);
ScenarioConfig load_scenario(const std::filesystem::path& path);
std::string dump_scenario(const ScenarioConfig& cfg);

struct FrameState {
  std::int64_t frame = 0;
  double timestamp = 0.0;
  EgoPose truth;
  EgoPose slam;  // truth translation, corrupted yaw
};

struct Observation {
  std::int64_t track_id = 0;
  std::int64_t frame = 0;
  Box3D box3d;             // camera frame ground truth
  Box2D clean_box;         // projected, clipped to the image
  Box2D box;               // jittered detection
  double truncation = 0.0;
  double occluded_fraction = 0.0;
  int occlusion = 0;       // KITTI level 0/1/2
  Angle global;            // camera yaw of the vehicle
  Angle local;             // global - ray_angle(clean_box)
  Angle feature;           // appearance descriptor
  MotionKind motion = MotionKind::kStationary;
  double score = 1.0;
};

struct Scene {
  CameraIntrinsics camera{1.0, 1.0, 0.0, 0.0};
  double image_width = 0.0;
  double image_height = 0.0;
  std::vector<FrameState> frames;
  std::vector<VehicleSpec> vehicles;
  std::vector<Observation> observations;  // ordered by (frame, track_id)

  /// Observations grouped per track (ordered by track id, then frame).
  /// `rough` (aligned with observations) fills TrackFrame::rough_local.
  std::vector<ObservationTrack> tracks(const std::vector<double>* rough = nullptr) const;
};

/// Vehicle pose in the world at time t.
struct VehicleState {
  double x = 0.0;
  double z = 0.0;
  Angle yaw;
};
VehicleState vehicle_state(const VehicleSpec& v, double t);

/// Ego pose after travelling `arc_length` metres along the path (the last
/// segment is extended straight beyond the path end).
EgoPose ego_pose_at(const std::vector<PathSegment>& path, double arc_length);

/// Vehicle box in the camera frame of `ego`.
Box3D to_camera(const VehicleState& v, const BoxSize& size, const EgoPose& ego, double mount_height);

Scene generate_scene(const ScenarioConfig& cfg);

struct CorruptedEstimates {
  std::vector<double> rough;   // aligned with scene.observations
  std::vector<bool> outlier;
};

/// Rough M_0 local-angle estimates for every observation. Uses its own
/// random stream derived from `seed`, so scene geometry does not depend on
/// estimator settings.
CorruptedEstimates corrupt_estimates(const Scene& scene, const NoiseSpec& noise, std::uint64_t seed);

}  // namespace egoyaw
