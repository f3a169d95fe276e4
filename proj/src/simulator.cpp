#include "egoyaw/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <string>

#include "egoyaw/errors.hpp"

namespace egoyaw {

namespace {

// Independent random streams: one per purpose, and per (track, frame) where
// draws must not depend on what else is in the scene.
enum Stream : std::uint64_t {
  kParkedStream = 1,
  kMoverStream = 2,
  kSlamStream = 3,
  kJitterStream = 4,
  kEstimateStream = 5,
};

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t a = 0,
                         std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32), static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double gaussian(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(rng);
}

double path_length(const std::vector<PathSegment>& path) {
  double total = 0.0;
  for (const auto& seg : path) total += seg.length;
  return total;
}

double path_duration(const std::vector<PathSegment>& path) {
  double total = 0.0;
  for (const auto& seg : path) total += seg.length / seg.speed;
  return total;
}

double arc_length_at_time(const std::vector<PathSegment>& path, double t) {
  double s = 0.0;
  for (const auto& seg : path) {
    const double dt = seg.length / seg.speed;
    if (t <= dt) return s + t * seg.speed;
    t -= dt;
    s += seg.length;
  }
  return s + t * path.back().speed;
}

EgoPose advance(const EgoPose& p, double curvature, double ds) {
  const double psi0 = p.yaw.rad();
  if (std::abs(curvature) < 1e-12) {
    return {p.x + ds * std::sin(psi0), p.z + ds * std::cos(psi0), p.yaw};
  }
  const double psi1 = psi0 + curvature * ds;
  return {p.x + (std::cos(psi0) - std::cos(psi1)) / curvature,
          p.z + (std::sin(psi1) - std::sin(psi0)) / curvature, Angle(psi1)};
}

// Lateral unit vector pointing to the right of heading psi.
Vec2 right_of(Angle psi) { return {std::cos(psi.rad()), -std::sin(psi.rad())}; }

// Heading psi expressed as a vehicle yaw whose length axis points forward.
Angle vehicle_yaw_along(Angle psi) { return psi - Angle(kPi / 2.0); }

Box3D world_box(double x, double z, Angle yaw, const BoxSize& size, double margin) {
  return {{x, 0.0, z}, {size.h, size.w + 2.0 * margin, size.l + 2.0 * margin}, yaw};
}

double occluded_fraction(const Box2D& target, const std::vector<Box2D>& closer) {
  if (closer.empty()) return 0.0;
  constexpr int kGrid = 16;
  int covered = 0;
  for (int i = 0; i < kGrid; ++i) {
    const double u = target.u_min + (i + 0.5) * target.width() / kGrid;
    for (int j = 0; j < kGrid; ++j) {
      const double v = target.v_min + (j + 0.5) * target.height() / kGrid;
      for (const auto& b : closer) {
        if (u >= b.u_min && u <= b.u_max && v >= b.v_min && v <= b.v_max) {
          ++covered;
          break;
        }
      }
    }
  }
  return static_cast<double>(covered) / (kGrid * kGrid);
}

Box2D clip_to_image(const Box2D& b, double width, double height) {
  return {std::clamp(b.u_min, 0.0, width), std::clamp(b.v_min, 0.0, height),
          std::clamp(b.u_max, 0.0, width), std::clamp(b.v_max, 0.0, height)};
}

struct PlacementContext {
  std::vector<Vec2> path_samples;
  double clearance = 3.5;
};

bool clear_of_path(const Box3D& box, const PlacementContext& ctx) {
  for (const auto& c : box_footprint(box)) {
    for (const auto& p : ctx.path_samples) {
      if (std::hypot(c.x - p.x, c.z - p.z) < ctx.clearance) return false;
    }
  }
  return true;
}

}  // namespace

const char* motion_name(MotionKind m) {
  switch (m) {
    case MotionKind::kStationary: return "stationary";
    case MotionKind::kStraight: return "straight";
    case MotionKind::kTurning: return "turning";
  }
  return "unknown";
}

MotionKind parse_motion(const std::string& name) {
  if (name == "stationary") return MotionKind::kStationary;
  if (name == "straight") return MotionKind::kStraight;
  if (name == "turning") return MotionKind::kTurning;
  throw std::invalid_argument("unknown motion kind '" + name + "'");
}

void ScenarioConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("scenario: ") + what);
  };
  require(version == kScenarioFormatVersion, "unsupported version");
  require(frame_rate > 0.0 && std::isfinite(frame_rate), "frame_rate must be positive");
  require(camera.fx > 0.0 && camera.fy > 0.0, "focal lengths must be positive");
  require(camera.width > 0.0 && camera.height > 0.0, "image size must be positive");
  require(camera.mount_height > 0.0, "mount_height must be positive");
  require(!ego_path.empty(), "ego_path must have at least one segment");
  for (const auto& seg : ego_path) {
    require(seg.length > 0.0 && std::isfinite(seg.length), "segment length must be positive");
    require(seg.speed > 0.0 && std::isfinite(seg.speed), "segment speed must be positive");
    require(std::isfinite(seg.curvature), "segment curvature must be finite");
  }
  std::vector<std::int64_t> ids;
  for (const auto& v : vehicles) {
    require(v.id > 0, "vehicle ids must be positive");
    require(v.size.h > 0.0 && v.size.w > 0.0 && v.size.l > 0.0, "vehicle size must be positive");
    require(v.speed >= 0.0, "vehicle speed must be non-negative");
    ids.push_back(v.id);
  }
  std::sort(ids.begin(), ids.end());
  require(std::adjacent_find(ids.begin(), ids.end()) == ids.end(), "vehicle ids must be unique");
  require(traffic.moving_fraction >= 0.0 && traffic.turning_fraction >= 0.0 &&
              traffic.moving_fraction + traffic.turning_fraction < 1.0,
          "moving_fraction + turning_fraction must be in [0, 1)");
  require(traffic.min_lateral > 0.0 && traffic.max_lateral >= traffic.min_lateral,
          "invalid lateral range");
  require(traffic.moving_speed_min > 0.0 && traffic.moving_speed_max >= traffic.moving_speed_min,
          "invalid moving speed range");
  require(traffic.yaw_rate_min > 0.0 && traffic.yaw_rate_max >= traffic.yaw_rate_min,
          "invalid yaw rate range");
  require(noise.slam_noise_sigma >= 0.0 && noise.estimator_noise_sigma >= 0.0 &&
              noise.detection_jitter_px >= 0.0,
          "noise sigmas must be non-negative");
  require(noise.appearance_amplitude * noise.appearance_frequency < 1.0,
          "appearance distortion must keep the descriptor monotonic (amplitude * frequency < 1)");
  require(noise.outlier_rate >= 0.0 && noise.outlier_rate <= 1.0, "outlier_rate must be in [0, 1]");
  require(visibility.min_depth > 0.0 && visibility.max_depth > visibility.min_depth,
          "invalid depth range");
  require(visibility.max_truncation >= 0.0 && visibility.max_truncation <= 1.0,
          "max_truncation must be in [0, 1]");
}

ScenarioConfig default_scenario() {
  ScenarioConfig cfg;
  cfg.ego_path = {
      {250.0, 0.0, 8.0},
      {120.0, 1.0 / 80.0, 6.0},
      {250.0, 0.0, 8.0},
      {140.0, -1.0 / 60.0, 6.0},
      {250.0, 0.0, 8.0},
  };
  return cfg;
}

EgoPose ego_pose_at(const std::vector<PathSegment>& path, double arc_length) {
  EgoPose pose;
  double remaining = arc_length;
  for (const auto& seg : path) {
    const double ds = std::min(remaining, seg.length);
    pose = advance(pose, seg.curvature, ds);
    remaining -= ds;
    if (remaining <= 0.0) return pose;
  }
  return advance(pose, 0.0, remaining);
}

VehicleState vehicle_state(const VehicleSpec& v, double t) {
  const double dt = t - v.t_ref;
  const double psi0 = v.yaw.rad();
  switch (v.motion) {
    case MotionKind::kStationary:
      return {v.x, v.z, v.yaw};
    case MotionKind::kStraight:
      return {v.x + v.speed * dt * std::cos(psi0), v.z - v.speed * dt * std::sin(psi0), v.yaw};
    case MotionKind::kTurning: {
      if (std::abs(v.yaw_rate) < 1e-12) {
        return {v.x + v.speed * dt * std::cos(psi0), v.z - v.speed * dt * std::sin(psi0), v.yaw};
      }
      const double psi1 = psi0 + v.yaw_rate * dt;
      const double r = v.speed / v.yaw_rate;
      return {v.x + r * (std::sin(psi1) - std::sin(psi0)), v.z + r * (std::cos(psi1) - std::cos(psi0)),
              Angle(psi1)};
    }
  }
  return {v.x, v.z, v.yaw};
}

Box3D to_camera(const VehicleState& v, const BoxSize& size, const EgoPose& ego, double mount_height) {
  const double dx = v.x - ego.x;
  const double dz = v.z - ego.z;
  const double c = std::cos(ego.yaw.rad());
  const double s = std::sin(ego.yaw.rad());
  return {{c * dx - s * dz, mount_height - 0.5 * size.h, s * dx + c * dz}, size, v.yaw - ego.yaw};
}

Scene generate_scene(const ScenarioConfig& cfg) {
  cfg.validate();
  Scene scene;
  scene.camera = cfg.camera.intrinsics();
  scene.image_width = cfg.camera.width;
  scene.image_height = cfg.camera.height;

  // Frames and poses.
  const double duration = path_duration(cfg.ego_path);
  const auto frame_count = static_cast<std::int64_t>(std::floor(duration * cfg.frame_rate)) + 1;
  auto slam_rng = make_rng(cfg.seed, kSlamStream);
  for (std::int64_t k = 0; k < frame_count; ++k) {
    FrameState f;
    f.frame = k;
    f.timestamp = static_cast<double>(k) / cfg.frame_rate;
    f.truth = ego_pose_at(cfg.ego_path, arc_length_at_time(cfg.ego_path, f.timestamp));
    const double err = cfg.noise.slam_bias + cfg.noise.slam_drift_rate * f.timestamp +
                       gaussian(slam_rng, cfg.noise.slam_noise_sigma);
    f.slam = {f.truth.x, f.truth.z, f.truth.yaw + Angle(err)};
    scene.frames.push_back(f);
  }

  // Vehicles: explicit ones first, then parked traffic, then movers.
  scene.vehicles = cfg.vehicles;
  std::int64_t next_id = 1;
  for (const auto& v : scene.vehicles) next_id = std::max(next_id, v.id + 1);

  const double total_length = path_length(cfg.ego_path);
  PlacementContext ctx;
  for (double s = -20.0; s <= total_length + 80.0; s += 1.0) {
    const EgoPose p = ego_pose_at(cfg.ego_path, s);
    ctx.path_samples.push_back({p.x, p.z});
  }
  const BoxSize default_size{1.53, 1.63, 3.88};

  std::vector<Box3D> placed;
  for (const auto& v : scene.vehicles) {
    if (v.motion == MotionKind::kStationary) placed.push_back(world_box(v.x, v.z, v.yaw, v.size, 0.3));
  }

  auto parked_rng = make_rng(cfg.seed, kParkedStream);
  for (std::size_t i = 0; i < cfg.traffic.count; ++i) {
    BoxSize size{default_size.h * uniform(parked_rng, 0.92, 1.08), default_size.w * uniform(parked_rng, 0.92, 1.08),
                 default_size.l * uniform(parked_rng, 0.9, 1.1)};
    for (int attempt = 0; attempt < 200; ++attempt) {
      const double s = uniform(parked_rng, 15.0, total_length + 30.0);
      const EgoPose road = ego_pose_at(cfg.ego_path, s);
      const double side = uniform(parked_rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
      const double lateral = side * uniform(parked_rng, cfg.traffic.min_lateral, cfg.traffic.max_lateral);
      const Vec2 r = right_of(road.yaw);
      const double x = road.x + lateral * r.x;
      const double z = road.z + lateral * r.z;
      const double kind = uniform(parked_rng, 0.0, 1.0);
      const double flip = uniform(parked_rng, 0.0, 1.0) < 0.5 ? 0.0 : kPi;
      Angle yaw;
      if (kind < 0.4) {
        yaw = vehicle_yaw_along(road.yaw) + Angle(flip + deg2rad(uniform(parked_rng, -5.0, 5.0)));
      } else if (kind < 0.6) {
        yaw = road.yaw + Angle(flip + deg2rad(uniform(parked_rng, -5.0, 5.0)));
      } else {
        yaw = Angle(uniform(parked_rng, -kPi, kPi));
      }
      const Box3D candidate = world_box(x, z, yaw, size, 0.3);
      if (!clear_of_path(candidate, ctx)) continue;
      const bool overlaps = std::any_of(placed.begin(), placed.end(), [&](const Box3D& other) {
        return bev_intersection_area(candidate, other) > 0.0;
      });
      if (overlaps) continue;
      placed.push_back(candidate);
      VehicleSpec v;
      v.id = next_id++;
      v.x = x;
      v.z = z;
      v.yaw = yaw;
      v.size = size;
      scene.vehicles.push_back(v);
      break;
    }
  }

  // Movers are a share of all generated traffic, drawn from their own stream
  // so the parked layout does not depend on them.
  const double mover_share = cfg.traffic.moving_fraction + cfg.traffic.turning_fraction;
  const double parked = static_cast<double>(cfg.traffic.count);
  const auto straight_count = static_cast<std::size_t>(
      std::llround(parked * cfg.traffic.moving_fraction / (1.0 - mover_share)));
  const auto turning_count = static_cast<std::size_t>(
      std::llround(parked * cfg.traffic.turning_fraction / (1.0 - mover_share)));
  auto mover_rng = make_rng(cfg.seed, kMoverStream);
  for (std::size_t i = 0; i < straight_count + turning_count; ++i) {
    const bool turning = i >= straight_count;
    VehicleSpec v;
    v.id = next_id++;
    v.size = {default_size.h * uniform(mover_rng, 0.92, 1.08), default_size.w * uniform(mover_rng, 0.92, 1.08),
              default_size.l * uniform(mover_rng, 0.9, 1.1)};
    v.t_ref = uniform(mover_rng, 0.0, duration);
    const EgoPose road = ego_pose_at(cfg.ego_path, arc_length_at_time(cfg.ego_path, v.t_ref) +
                                                       uniform(mover_rng, 12.0, 45.0));
    const Vec2 r = right_of(road.yaw);
    if (!turning) {
      const bool oncoming = uniform(mover_rng, 0.0, 1.0) < 0.5;
      const double lateral = oncoming ? -2.5 : 2.5;
      v.x = road.x + lateral * r.x;
      v.z = road.z + lateral * r.z;
      v.yaw = vehicle_yaw_along(road.yaw) + Angle(oncoming ? kPi : 0.0);
      v.motion = MotionKind::kStraight;
      v.speed = uniform(mover_rng, cfg.traffic.moving_speed_min, cfg.traffic.moving_speed_max);
    } else {
      const double side = uniform(mover_rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
      const double lateral = side * uniform(mover_rng, 3.0, cfg.traffic.max_lateral);
      v.x = road.x + lateral * r.x;
      v.z = road.z + lateral * r.z;
      v.yaw = Angle(uniform(mover_rng, -kPi, kPi));
      v.motion = MotionKind::kTurning;
      v.speed = uniform(mover_rng, cfg.traffic.moving_speed_min, std::min(8.0, cfg.traffic.moving_speed_max));
      v.yaw_rate = (uniform(mover_rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0) *
                   uniform(mover_rng, cfg.traffic.yaw_rate_min, cfg.traffic.yaw_rate_max);
    }
    scene.vehicles.push_back(v);
  }

  // Observations.
  const CameraIntrinsics& cam = scene.camera;
  const NoiseSpec& noise = cfg.noise;
  const VisibilitySpec& vis = cfg.visibility;
  for (const auto& f : scene.frames) {
    std::vector<Observation> visible;
    for (const auto& v : scene.vehicles) {
      const Box3D box = to_camera(vehicle_state(v, f.timestamp), v.size, f.truth, cfg.camera.mount_height);
      if (box.center.z > vis.max_depth) continue;
      const auto corners = box3d_corners(box);
      const bool in_front = std::all_of(corners.begin(), corners.end(),
                                        [&](const Vec3& c) { return c.z >= vis.min_depth; });
      if (!in_front) continue;
      const Box2D full = project_box3d(box, cam);
      const Box2D clipped = clip_to_image(full, cfg.camera.width, cfg.camera.height);
      if (!clipped.valid()) continue;
      const double truncation = 1.0 - clipped.area() / full.area();
      if (truncation > vis.max_truncation) continue;
      if (clipped.height() < vis.min_height_px) continue;

      Observation o;
      o.track_id = v.id;
      o.frame = f.frame;
      o.box3d = box;
      o.clean_box = clipped;
      o.truncation = truncation;
      o.global = box.yaw;
      o.local = local_from_global(box.yaw, ray_angle(clipped, cam));
      o.feature = Angle(o.local.rad() +
                        noise.appearance_amplitude *
                            std::sin(noise.appearance_frequency * o.local.rad() + noise.appearance_phase));
      o.motion = v.motion;
      visible.push_back(o);
    }

    std::vector<std::size_t> order(visible.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const auto range = [&](std::size_t i) {
      const Vec3& c = visible[i].box3d.center;
      return std::hypot(c.x, c.z);
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return range(a) < range(b); });
    std::vector<Box2D> closer;
    std::vector<bool> keep(visible.size(), false);
    for (std::size_t i : order) {
      Observation& o = visible[i];
      o.occluded_fraction = occluded_fraction(o.clean_box, closer);
      closer.push_back(o.clean_box);
      o.occlusion = o.occluded_fraction < 0.15 ? 0 : (o.occluded_fraction < 0.5 ? 1 : 2);
      keep[i] = o.occluded_fraction <= vis.max_occluded_fraction;
    }

    for (std::size_t i = 0; i < visible.size(); ++i) {
      if (!keep[i]) continue;
      Observation& o = visible[i];
      auto jitter = make_rng(cfg.seed, kJitterStream, static_cast<std::uint64_t>(o.track_id),
                             static_cast<std::uint64_t>(o.frame));
      const double s = noise.detection_jitter_px;
      Box2D b{o.clean_box.u_min + gaussian(jitter, s), o.clean_box.v_min + gaussian(jitter, s),
              o.clean_box.u_max + gaussian(jitter, s), o.clean_box.v_max + gaussian(jitter, s)};
      b = clip_to_image(b, cfg.camera.width, cfg.camera.height);
      o.box = b.valid() ? b : o.clean_box;
      const double depth_term = std::clamp(o.box3d.center.z / vis.max_depth, 0.0, 1.0);
      o.score = std::clamp(1.0 - 0.4 * o.occluded_fraction - 0.4 * o.truncation - 0.15 * depth_term, 0.05, 1.0);
      scene.observations.push_back(o);
    }
  }
  std::stable_sort(scene.observations.begin(), scene.observations.end(),
                   [](const Observation& a, const Observation& b) {
                     return a.frame != b.frame ? a.frame < b.frame : a.track_id < b.track_id;
                   });
  return scene;
}

std::vector<ObservationTrack> Scene::tracks(const std::vector<double>* rough) const {
  if (rough != nullptr && rough->size() != observations.size()) {
    throw std::invalid_argument("Scene::tracks: rough estimates not aligned with observations");
  }
  std::map<std::int64_t, ObservationTrack> by_id;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const Observation& o = observations[i];
    const FrameState& f = frames.at(static_cast<std::size_t>(o.frame));
    ObservationTrack& t = by_id[o.track_id];
    t.track_id = o.track_id;
    TrackFrame tf;
    tf.frame = o.frame;
    tf.timestamp = f.timestamp;
    tf.box = o.box;
    tf.slam_yaw = f.slam.yaw;
    tf.cam = camera;
    if (rough != nullptr) tf.rough_local = (*rough)[i];
    tf.crop_feature = o.feature.rad();
    tf.truth_local = o.local.rad();
    t.frames.push_back(tf);
  }
  std::vector<ObservationTrack> out;
  out.reserve(by_id.size());
  for (auto& [id, t] : by_id) out.push_back(std::move(t));
  return out;
}

CorruptedEstimates corrupt_estimates(const Scene& scene, const NoiseSpec& noise, std::uint64_t seed) {
  CorruptedEstimates out;
  out.rough.reserve(scene.observations.size());
  out.outlier.reserve(scene.observations.size());
  for (const auto& o : scene.observations) {
    auto rng = make_rng(seed, kEstimateStream, static_cast<std::uint64_t>(o.track_id),
                        static_cast<std::uint64_t>(o.frame));
    const double truth = o.local.rad();
    const bool outlier = uniform(rng, 0.0, 1.0) < noise.outlier_rate;
    double value = 0.0;
    if (outlier) {
      const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
      value = truth + sign * uniform(rng, 0.5 * noise.outlier_magnitude, noise.outlier_magnitude);
    } else {
      value = truth +
              noise.estimator_distortion_amplitude *
                  std::sin(noise.estimator_distortion_frequency * truth + noise.estimator_distortion_phase) +
              gaussian(rng, noise.estimator_noise_sigma);
    }
    out.rough.push_back(wrap_radians(value));
    out.outlier.push_back(outlier);
  }
  return out;
}

}  // namespace egoyaw
