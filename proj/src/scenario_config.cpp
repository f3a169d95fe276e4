#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include <yaml-cpp/yaml.h>

#include "egoyaw/errors.hpp"
#include "egoyaw/simulator.hpp"

namespace egoyaw {

namespace {

// Rejects keys outside `allowed` so typos do not silently fall back to defaults.
void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw std::invalid_argument("scenario: '" + where + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.contains(key)) throw std::invalid_argument("scenario: unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out) {
  if (const auto v = node[key]) out = v.as<T>();
}

void read_deg(const YAML::Node& node, const char* key, double& out_rad) {
  if (const auto v = node[key]) out_rad = deg2rad(v.as<double>());
}

VehicleSpec parse_vehicle(const YAML::Node& n) {
  check_keys(n, "vehicles[]", {"id", "x", "z", "yaw_deg", "size", "motion", "speed", "yaw_rate_deg", "t_ref"});
  VehicleSpec v;
  read(n, "id", v.id);
  read(n, "x", v.x);
  read(n, "z", v.z);
  if (const auto y = n["yaw_deg"]) v.yaw = Angle::from_degrees(y.as<double>());
  if (const auto s = n["size"]) {
    if (!s.IsSequence() || s.size() != 3) throw std::invalid_argument("scenario: vehicle size must be [h, w, l]");
    v.size = {s[0].as<double>(), s[1].as<double>(), s[2].as<double>()};
  }
  if (const auto m = n["motion"]) v.motion = parse_motion(m.as<std::string>());
  read(n, "speed", v.speed);
  read_deg(n, "yaw_rate_deg", v.yaw_rate);
  read(n, "t_ref", v.t_ref);
  return v;
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& yaml_text) {
  ScenarioConfig cfg = default_scenario();
  try {
    const YAML::Node root = YAML::Load(yaml_text);
    if (root.IsNull()) {
      cfg.validate();
      return cfg;
    }
    check_keys(root, "root",
               {"version", "seed", "frame_rate", "camera", "ego_path", "vehicles", "traffic", "noise", "visibility"});
    read(root, "version", cfg.version);
    read(root, "seed", cfg.seed);
    read(root, "frame_rate", cfg.frame_rate);

    if (const auto c = root["camera"]) {
      check_keys(c, "camera", {"fx", "fy", "cx", "cy", "width", "height", "mount_height"});
      read(c, "fx", cfg.camera.fx);
      read(c, "fy", cfg.camera.fy);
      read(c, "cx", cfg.camera.cx);
      read(c, "cy", cfg.camera.cy);
      read(c, "width", cfg.camera.width);
      read(c, "height", cfg.camera.height);
      read(c, "mount_height", cfg.camera.mount_height);
    }
    if (const auto p = root["ego_path"]) {
      if (!p.IsSequence()) throw std::invalid_argument("scenario: 'ego_path' must be a list");
      cfg.ego_path.clear();
      for (const auto& seg : p) {
        check_keys(seg, "ego_path[]", {"length", "curvature", "speed"});
        PathSegment s;
        read(seg, "length", s.length);
        read(seg, "curvature", s.curvature);
        read(seg, "speed", s.speed);
        cfg.ego_path.push_back(s);
      }
    }
    if (const auto vs = root["vehicles"]) {
      if (!vs.IsSequence()) throw std::invalid_argument("scenario: 'vehicles' must be a list");
      for (const auto& v : vs) cfg.vehicles.push_back(parse_vehicle(v));
    }
    if (const auto t = root["traffic"]) {
      check_keys(t, "traffic",
                 {"count", "moving_fraction", "turning_fraction", "min_lateral", "max_lateral", "moving_speed_min",
                  "moving_speed_max", "yaw_rate_min_deg", "yaw_rate_max_deg"});
      read(t, "count", cfg.traffic.count);
      read(t, "moving_fraction", cfg.traffic.moving_fraction);
      read(t, "turning_fraction", cfg.traffic.turning_fraction);
      read(t, "min_lateral", cfg.traffic.min_lateral);
      read(t, "max_lateral", cfg.traffic.max_lateral);
      read(t, "moving_speed_min", cfg.traffic.moving_speed_min);
      read(t, "moving_speed_max", cfg.traffic.moving_speed_max);
      read_deg(t, "yaw_rate_min_deg", cfg.traffic.yaw_rate_min);
      read_deg(t, "yaw_rate_max_deg", cfg.traffic.yaw_rate_max);
    }
    if (const auto n = root["noise"]) {
      check_keys(n, "noise",
                 {"slam_bias_deg", "slam_noise_sigma_deg", "slam_drift_rate_deg", "appearance_amplitude_deg",
                  "appearance_frequency", "appearance_phase", "estimator_distortion_amplitude_deg",
                  "estimator_distortion_frequency", "estimator_distortion_phase", "estimator_noise_sigma_deg",
                  "outlier_rate", "outlier_magnitude_deg", "detection_jitter_px"});
      NoiseSpec& s = cfg.noise;
      read_deg(n, "slam_bias_deg", s.slam_bias);
      read_deg(n, "slam_noise_sigma_deg", s.slam_noise_sigma);
      read_deg(n, "slam_drift_rate_deg", s.slam_drift_rate);
      read_deg(n, "appearance_amplitude_deg", s.appearance_amplitude);
      read(n, "appearance_frequency", s.appearance_frequency);
      read(n, "appearance_phase", s.appearance_phase);
      read_deg(n, "estimator_distortion_amplitude_deg", s.estimator_distortion_amplitude);
      read(n, "estimator_distortion_frequency", s.estimator_distortion_frequency);
      read(n, "estimator_distortion_phase", s.estimator_distortion_phase);
      read_deg(n, "estimator_noise_sigma_deg", s.estimator_noise_sigma);
      read(n, "outlier_rate", s.outlier_rate);
      read_deg(n, "outlier_magnitude_deg", s.outlier_magnitude);
      read(n, "detection_jitter_px", s.detection_jitter_px);
    }
    if (const auto v = root["visibility"]) {
      check_keys(v, "visibility", {"min_depth", "max_depth", "min_height_px", "max_truncation", "max_occluded_fraction"});
      read(v, "min_depth", cfg.visibility.min_depth);
      read(v, "max_depth", cfg.visibility.max_depth);
      read(v, "min_height_px", cfg.visibility.min_height_px);
      read(v, "max_truncation", cfg.visibility.max_truncation);
      read(v, "max_occluded_fraction", cfg.visibility.max_occluded_fraction);
    }
  } catch (const YAML::Exception& e) {
    throw std::invalid_argument(std::string("scenario: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string dump_scenario(const ScenarioConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "version" << YAML::Value << cfg.version;
  out << YAML::Key << "seed" << YAML::Value << cfg.seed;
  out << YAML::Key << "frame_rate" << YAML::Value << cfg.frame_rate;

  const CameraSpec& c = cfg.camera;
  out << YAML::Key << "camera" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "fx" << YAML::Value << c.fx << YAML::Key << "fy" << YAML::Value << c.fy;
  out << YAML::Key << "cx" << YAML::Value << c.cx << YAML::Key << "cy" << YAML::Value << c.cy;
  out << YAML::Key << "width" << YAML::Value << c.width << YAML::Key << "height" << YAML::Value << c.height;
  out << YAML::Key << "mount_height" << YAML::Value << c.mount_height;
  out << YAML::EndMap;

  out << YAML::Key << "ego_path" << YAML::Value << YAML::BeginSeq;
  for (const auto& s : cfg.ego_path) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "length" << YAML::Value << s.length << YAML::Key
        << "curvature" << YAML::Value << s.curvature << YAML::Key << "speed" << YAML::Value << s.speed
        << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "vehicles" << YAML::Value << YAML::BeginSeq;
  for (const auto& v : cfg.vehicles) {
    out << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << v.id;
    out << YAML::Key << "x" << YAML::Value << v.x << YAML::Key << "z" << YAML::Value << v.z;
    out << YAML::Key << "yaw_deg" << YAML::Value << v.yaw.deg();
    out << YAML::Key << "size" << YAML::Value << YAML::Flow << YAML::BeginSeq << v.size.h << v.size.w << v.size.l
        << YAML::EndSeq;
    out << YAML::Key << "motion" << YAML::Value << motion_name(v.motion);
    out << YAML::Key << "speed" << YAML::Value << v.speed;
    out << YAML::Key << "yaw_rate_deg" << YAML::Value << rad2deg(v.yaw_rate);
    out << YAML::Key << "t_ref" << YAML::Value << v.t_ref;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  const TrafficSpec& t = cfg.traffic;
  out << YAML::Key << "traffic" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "count" << YAML::Value << t.count;
  out << YAML::Key << "moving_fraction" << YAML::Value << t.moving_fraction;
  out << YAML::Key << "turning_fraction" << YAML::Value << t.turning_fraction;
  out << YAML::Key << "min_lateral" << YAML::Value << t.min_lateral;
  out << YAML::Key << "max_lateral" << YAML::Value << t.max_lateral;
  out << YAML::Key << "moving_speed_min" << YAML::Value << t.moving_speed_min;
  out << YAML::Key << "moving_speed_max" << YAML::Value << t.moving_speed_max;
  out << YAML::Key << "yaw_rate_min_deg" << YAML::Value << rad2deg(t.yaw_rate_min);
  out << YAML::Key << "yaw_rate_max_deg" << YAML::Value << rad2deg(t.yaw_rate_max);
  out << YAML::EndMap;

  const NoiseSpec& n = cfg.noise;
  out << YAML::Key << "noise" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "slam_bias_deg" << YAML::Value << rad2deg(n.slam_bias);
  out << YAML::Key << "slam_noise_sigma_deg" << YAML::Value << rad2deg(n.slam_noise_sigma);
  out << YAML::Key << "slam_drift_rate_deg" << YAML::Value << rad2deg(n.slam_drift_rate);
  out << YAML::Key << "appearance_amplitude_deg" << YAML::Value << rad2deg(n.appearance_amplitude);
  out << YAML::Key << "appearance_frequency" << YAML::Value << n.appearance_frequency;
  out << YAML::Key << "appearance_phase" << YAML::Value << n.appearance_phase;
  out << YAML::Key << "estimator_distortion_amplitude_deg" << YAML::Value << rad2deg(n.estimator_distortion_amplitude);
  out << YAML::Key << "estimator_distortion_frequency" << YAML::Value << n.estimator_distortion_frequency;
  out << YAML::Key << "estimator_distortion_phase" << YAML::Value << n.estimator_distortion_phase;
  out << YAML::Key << "estimator_noise_sigma_deg" << YAML::Value << rad2deg(n.estimator_noise_sigma);
  out << YAML::Key << "outlier_rate" << YAML::Value << n.outlier_rate;
  out << YAML::Key << "outlier_magnitude_deg" << YAML::Value << rad2deg(n.outlier_magnitude);
  out << YAML::Key << "detection_jitter_px" << YAML::Value << n.detection_jitter_px;
  out << YAML::EndMap;

  const VisibilitySpec& v = cfg.visibility;
  out << YAML::Key << "visibility" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "min_depth" << YAML::Value << v.min_depth;
  out << YAML::Key << "max_depth" << YAML::Value << v.max_depth;
  out << YAML::Key << "min_height_px" << YAML::Value << v.min_height_px;
  out << YAML::Key << "max_truncation" << YAML::Value << v.max_truncation;
  out << YAML::Key << "max_occluded_fraction" << YAML::Value << v.max_occluded_fraction;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace egoyaw
