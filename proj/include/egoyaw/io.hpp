#pragma once

// Plain-text file formats. All angles are radians; numbers are written with
// 17 significant digits so every reader/writer pair round-trips exactly.
// Lines starting with '#' and blank lines are ignored by every reader.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "egoyaw/evaluation.hpp"
#include "egoyaw/geometry.hpp"
#include "egoyaw/selfsup.hpp"
#include "egoyaw/simulator.hpp"
#include "egoyaw/track.hpp"

namespace egoyaw {

inline constexpr int kTrackFormatVersion = 1;
inline constexpr int kTargetFormatVersion = 1;

/// Formats x with 17 significant digits ("nan" for NaN).
std::string format_number(double x);

/// Track file: `track_id frame timestamp u_min v_min u_max v_max slam_yaw
/// [rough_local [crop_feature]]`, "nan" marking an absent rough value when a
/// feature follows. Lines are grouped by track and ordered by frame.
void write_tracks(std::ostream& out, const std::vector<ObservationTrack>& tracks);
std::vector<ObservationTrack> read_tracks(std::istream& in, const CameraIntrinsics& cam);

/// KITTI odometry layout: 12 numbers per line, row-major [R | t]. The planar
/// pose maps to R = R_y(psi), t = (x, 0, z).
void write_poses(std::ostream& out, const std::vector<EgoPose>& poses);
/// Throws IoError when a rotation is not orthonormal within 1e-6.
std::vector<EgoPose> read_poses(std::istream& in);
/// Yaw of a row-major 3x4 pose: atan2(R02, R22).
Angle yaw_from_rotation(const std::vector<double>& m12);

/// KITTI calibration: a "P2:" line with a row-major 3x4 projection matrix.
void write_calib(std::ostream& out, const CameraIntrinsics& cam);
/// Throws IoError when the P2 line is missing or malformed, or f <= 0.
CameraIntrinsics read_calib(std::istream& in);

/// KITTI object labels: type truncated occluded alpha u_min v_min u_max v_max
/// h w l x y z rotation_y [score]; (x, y, z) is the bottom-face center.
void write_labels(std::ostream& out, const std::vector<LabeledObject>& objects);
std::vector<LabeledObject> read_labels(std::istream& in);

/// Self-supervised targets: `track_id frame target_local weight`, preceded
/// by per-track `# track <id> b_hat <rad> removed <0|1> kept <n>` comments.
void write_targets(std::ostream& out, const std::vector<SelfSupTargets>& targets);

/// `frame timestamp` per line.
void write_times(std::ostream& out, const std::vector<double>& times);
std::vector<double> read_times(std::istream& in);

/// Ground truth per observation: `track_id frame true_local true_global motion`.
struct TruthRecord {
  std::int64_t track_id = 0;
  std::int64_t frame = 0;
  double local = 0.0;
  double global = 0.0;
  MotionKind motion = MotionKind::kStationary;

  bool operator==(const TruthRecord&) const = default;
};
void write_truth(std::ostream& out, const std::vector<TruthRecord>& truth);
std::vector<TruthRecord> read_truth(std::istream& in);

/// Sets TrackFrame::truth_local from matching (track_id, frame) records;
/// returns how many frames received a value.
std::size_t attach_truth(std::vector<ObservationTrack>& tracks, const std::vector<TruthRecord>& truth);

/// Opens `path` for reading/writing; throws IoError naming the path.
std::ifstream open_input(const std::filesystem::path& path);
std::ofstream open_output(const std::filesystem::path& path);

/// Frame label files `<dir>/<%06d>.txt`, keyed by frame id.
std::map<std::int64_t, std::vector<LabeledObject>> read_label_dir(const std::filesystem::path& dir);
void write_label_file(const std::filesystem::path& dir, std::int64_t frame,
                      const std::vector<LabeledObject>& objects);
std::string frame_file_name(std::int64_t frame);

/// Scene directory layout:
///   calib.txt      camera intrinsics
///   times.txt      frame timestamps
///   poses.txt      SLAM poses (biased/noisy yaw)
///   poses_gt.txt   true ego poses
///   tracks.txt     detections with SLAM yaw, crop feature and rough estimate
///   truth.txt      per-detection ground truth angles
///   label_2/       ground-truth KITTI labels, one file per frame
///   det_2/         detections as KITTI labels with score; the alpha column
///                  carries the crop feature
struct SceneFiles {
  CameraIntrinsics camera{1.0, 1.0, 0.0, 0.0};
  std::vector<double> times;
  std::vector<EgoPose> slam_poses;
  std::vector<EgoPose> true_poses;
  std::vector<ObservationTrack> tracks;
  std::vector<TruthRecord> truth;
  std::map<std::int64_t, std::vector<LabeledObject>> labels;
  std::map<std::int64_t, std::vector<LabeledObject>> detections;
};

/// Ground-truth KITTI label of a simulator observation.
LabeledObject label_of(const Observation& o);

/// Writes the scene (and rough estimates aligned with its observations, if
/// given). Throws IoError with the failing path.
void export_scene(const Scene& scene, const std::filesystem::path& dir,
                  const std::vector<double>* rough = nullptr);
SceneFiles import_scene(const std::filesystem::path& dir);

}  // namespace egoyaw
