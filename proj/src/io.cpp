#include "egoyaw/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "egoyaw/errors.hpp"

namespace egoyaw {

namespace {

// Whitespace tokens of the next content line; false at end of input.
bool next_fields(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no) {
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    fields.clear();
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) fields.push_back(tok);
    if (fields.empty() || fields.front().starts_with('#')) continue;
    return true;
  }
  return false;
}

[[noreturn]] void fail(const std::string& what, std::size_t line_no) {
  throw IoError(what + " (line " + std::to_string(line_no) + ")");
}

double parse_double(const std::string& s, std::size_t line_no) {
  if (s == "nan" || s == "NaN" || s == "-nan") return std::nan("");
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) fail("malformed number '" + s + "'", line_no);
  return v;
}

double parse_finite(const std::string& s, std::size_t line_no) {
  const double v = parse_double(s, line_no);
  if (!std::isfinite(v)) fail("non-finite value '" + s + "'", line_no);
  return v;
}

std::int64_t parse_int(const std::string& s, std::size_t line_no) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) fail("malformed integer '" + s + "'", line_no);
  return v;
}

Angle parse_angle(const std::string& s, std::size_t line_no) {
  const double v = parse_finite(s, line_no);
  if (!(v > -kPi && v <= kPi)) fail("angle outside (-pi, pi]: '" + s + "'", line_no);
  return Angle(v);
}

void check_stream(const std::ostream& out) {
  if (!out) throw IoError("write failed");
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_tracks(std::ostream& out, const std::vector<ObservationTrack>& tracks) {
  out << "# egoyaw-tracks " << kTrackFormatVersion << "\n";
  out << "# track_id frame timestamp u_min v_min u_max v_max slam_yaw rough_local crop_feature\n";
  for (const auto& t : tracks) {
    for (const auto& f : t.frames) {
      out << t.track_id << ' ' << f.frame << ' ' << format_number(f.timestamp) << ' ' << format_number(f.box.u_min)
          << ' ' << format_number(f.box.v_min) << ' ' << format_number(f.box.u_max) << ' '
          << format_number(f.box.v_max) << ' ' << format_number(f.slam_yaw.rad());
      if (f.rough_local || f.crop_feature) out << ' ' << format_number(f.rough_local.value_or(std::nan("")));
      if (f.crop_feature) out << ' ' << format_number(*f.crop_feature);
      out << '\n';
    }
  }
  check_stream(out);
}

std::vector<ObservationTrack> read_tracks(std::istream& in, const CameraIntrinsics& cam) {
  std::vector<ObservationTrack> tracks;
  std::map<std::int64_t, std::size_t> index;
  std::vector<std::string> f;
  std::size_t line_no = 0;
  while (next_fields(in, f, line_no)) {
    if (f.size() < 8 || f.size() > 10) fail("track line needs 8 to 10 fields", line_no);
    TrackFrame tf;
    const std::int64_t id = parse_int(f[0], line_no);
    tf.frame = parse_int(f[1], line_no);
    tf.timestamp = parse_finite(f[2], line_no);
    tf.box = {parse_finite(f[3], line_no), parse_finite(f[4], line_no), parse_finite(f[5], line_no),
              parse_finite(f[6], line_no)};
    if (!tf.box.valid()) fail("degenerate detection box", line_no);
    tf.slam_yaw = Angle(parse_finite(f[7], line_no));
    tf.cam = cam;
    if (f.size() >= 9) {
      const double r = parse_double(f[8], line_no);
      if (!std::isnan(r)) tf.rough_local = r;
    }
    if (f.size() == 10) {
      const double c = parse_double(f[9], line_no);
      if (!std::isnan(c)) tf.crop_feature = c;
    }
    auto [it, inserted] = index.try_emplace(id, tracks.size());
    if (inserted) tracks.push_back({id, {}});
    auto& frames = tracks[it->second].frames;
    if (!frames.empty() && (tf.frame <= frames.back().frame || tf.timestamp <= frames.back().timestamp)) {
      fail("track " + std::to_string(id) + " is not ordered by frame", line_no);
    }
    frames.push_back(tf);
  }
  return tracks;
}

void write_poses(std::ostream& out, const std::vector<EgoPose>& poses) {
  for (const auto& p : poses) {
    const double c = std::cos(p.yaw.rad());
    const double s = std::sin(p.yaw.rad());
    const double m[12] = {c, 0.0, s, p.x, 0.0, 1.0, 0.0, 0.0, -s, 0.0, c, p.z};
    for (int i = 0; i < 12; ++i) out << (i ? " " : "") << format_number(m[i]);
    out << '\n';
  }
  check_stream(out);
}

Angle yaw_from_rotation(const std::vector<double>& m) {
  if (m.size() != 12) throw std::invalid_argument("pose needs 12 numbers");
  return Angle(std::atan2(m[2], m[10]));
}

std::vector<EgoPose> read_poses(std::istream& in) {
  std::vector<EgoPose> poses;
  std::vector<std::string> f;
  std::size_t line_no = 0;
  while (next_fields(in, f, line_no)) {
    if (f.size() != 12) fail("pose line needs 12 numbers", line_no);
    std::vector<double> m(12);
    for (int i = 0; i < 12; ++i) m[i] = parse_finite(f[i], line_no);
    // R R^T = I within 1e-6.
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        double dot = 0.0;
        for (int k = 0; k < 3; ++k) dot += m[4 * a + k] * m[4 * b + k];
        if (std::abs(dot - (a == b ? 1.0 : 0.0)) > 1e-6) fail("pose rotation is not orthonormal", line_no);
      }
    }
    poses.push_back({m[3], m[11], yaw_from_rotation(m)});
  }
  return poses;
}

void write_calib(std::ostream& out, const CameraIntrinsics& cam) {
  const double p[12] = {cam.fx(), 0.0, cam.cx(), 0.0, 0.0, cam.fy(), cam.cy(), 0.0, 0.0, 0.0, 1.0, 0.0};
  out << "P2:";
  for (double v : p) out << ' ' << format_number(v);
  out << '\n';
  check_stream(out);
}

CameraIntrinsics read_calib(std::istream& in) {
  std::vector<std::string> f;
  std::size_t line_no = 0;
  while (next_fields(in, f, line_no)) {
    if (f[0] != "P2:") continue;
    if (f.size() != 13) fail("P2 line needs 12 numbers", line_no);
    std::vector<double> p(12);
    for (int i = 0; i < 12; ++i) p[i] = parse_finite(f[i + 1], line_no);
    if (!(p[0] > 0.0 && p[5] > 0.0)) fail("P2 focal lengths must be positive", line_no);
    return {p[0], p[5], p[2], p[6]};
  }
  throw IoError("calibration has no P2 line");
}

void write_labels(std::ostream& out, const std::vector<LabeledObject>& objects) {
  for (const auto& o : objects) {
    const Box3D& b = o.box3d;
    out << o.type << ' ' << format_number(o.truncated) << ' ' << o.occluded << ' ' << format_number(o.alpha.rad())
        << ' ' << format_number(o.box2d.u_min) << ' ' << format_number(o.box2d.v_min) << ' '
        << format_number(o.box2d.u_max) << ' ' << format_number(o.box2d.v_max) << ' ' << format_number(b.size.h)
        << ' ' << format_number(b.size.w) << ' ' << format_number(b.size.l) << ' ' << format_number(b.center.x)
        << ' ' << format_number(b.center.y + 0.5 * b.size.h) << ' ' << format_number(b.center.z) << ' '
        << format_number(b.yaw.rad());
    if (o.score) out << ' ' << format_number(*o.score);
    out << '\n';
  }
  check_stream(out);
}

std::vector<LabeledObject> read_labels(std::istream& in) {
  std::vector<LabeledObject> objects;
  std::vector<std::string> f;
  std::size_t line_no = 0;
  while (next_fields(in, f, line_no)) {
    if (f.size() != 15 && f.size() != 16) fail("label line needs 15 or 16 fields", line_no);
    LabeledObject o;
    o.type = f[0];
    o.truncated = parse_finite(f[1], line_no);
    o.occluded = static_cast<int>(parse_int(f[2], line_no));
    o.alpha = parse_angle(f[3], line_no);
    o.box2d = {parse_finite(f[4], line_no), parse_finite(f[5], line_no), parse_finite(f[6], line_no),
               parse_finite(f[7], line_no)};
    const BoxSize size{parse_finite(f[8], line_no), parse_finite(f[9], line_no), parse_finite(f[10], line_no)};
    const double y_bottom = parse_finite(f[12], line_no);
    o.box3d = {{parse_finite(f[11], line_no), y_bottom - 0.5 * size.h, parse_finite(f[13], line_no)},
               size,
               parse_angle(f[14], line_no)};
    if (f.size() == 16) o.score = parse_finite(f[15], line_no);
    objects.push_back(o);
  }
  return objects;
}

void write_targets(std::ostream& out, const std::vector<SelfSupTargets>& targets) {
  out << "# egoyaw-targets " << kTargetFormatVersion << "\n";
  out << "# track_id frame target_local weight\n";
  for (const auto& t : targets) {
    for (const auto& f : t.frames) {
      out << t.track_id << ' ' << f.frame << ' ' << format_number(f.local.rad()) << ' ' << format_number(f.weight)
          << '\n';
    }
  }
  check_stream(out);
}

void write_times(std::ostream& out, const std::vector<double>& times) {
  for (std::size_t i = 0; i < times.size(); ++i) out << i << ' ' << format_number(times[i]) << '\n';
  check_stream(out);
}

std::vector<double> read_times(std::istream& in) {
  std::vector<double> times;
  std::vector<std::string> f;
  std::size_t line_no = 0;
  while (next_fields(in, f, line_no)) {
    if (f.size() != 2) fail("times line needs 2 fields", line_no);
    if (parse_int(f[0], line_no) != static_cast<std::int64_t>(times.size())) fail("frame ids must be 0, 1, ...", line_no);
    times.push_back(parse_finite(f[1], line_no));
  }
  return times;
}

void write_truth(std::ostream& out, const std::vector<TruthRecord>& truth) {
  out << "# track_id frame true_local true_global motion\n";
  for (const auto& t : truth) {
    out << t.track_id << ' ' << t.frame << ' ' << format_number(t.local) << ' ' << format_number(t.global) << ' '
        << motion_name(t.motion) << '\n';
  }
  check_stream(out);
}

std::vector<TruthRecord> read_truth(std::istream& in) {
  std::vector<TruthRecord> truth;
  std::vector<std::string> f;
  std::size_t line_no = 0;
  while (next_fields(in, f, line_no)) {
    if (f.size() != 5) fail("truth line needs 5 fields", line_no);
    TruthRecord t;
    t.track_id = parse_int(f[0], line_no);
    t.frame = parse_int(f[1], line_no);
    t.local = parse_angle(f[2], line_no).rad();
    t.global = parse_angle(f[3], line_no).rad();
    try {
      t.motion = parse_motion(f[4]);
    } catch (const std::invalid_argument& e) {
      fail(e.what(), line_no);
    }
    truth.push_back(t);
  }
  return truth;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string frame_file_name(std::int64_t frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06lld.txt", static_cast<long long>(frame));
  return buf;
}

std::map<std::int64_t, std::vector<LabeledObject>> read_label_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::map<std::int64_t, std::vector<LabeledObject>> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (!entry.is_regular_file() || p.extension() != ".txt") continue;
    const std::string stem = p.stem().string();
    std::int64_t frame = 0;
    const auto [ptr, ec] = std::from_chars(stem.data(), stem.data() + stem.size(), frame);
    if (ec != std::errc{} || ptr != stem.data() + stem.size()) continue;
    auto in = open_input(p);
    try {
      out[frame] = read_labels(in);
    } catch (const IoError& e) {
      throw IoError(p.string() + ": " + e.what());
    }
  }
  return out;
}

void write_label_file(const std::filesystem::path& dir, std::int64_t frame,
                      const std::vector<LabeledObject>& objects) {
  const auto path = dir / frame_file_name(frame);
  auto out = open_output(path);
  write_labels(out, objects);
  out.close();
  if (!out) throw IoError("write failed: " + path.string());
}

LabeledObject label_of(const Observation& o) {
  LabeledObject l;
  l.truncated = o.truncation;
  l.occluded = o.occlusion;
  l.alpha = o.local;
  l.box2d = o.clean_box;
  l.box3d = o.box3d;
  return l;
}

namespace {

template <typename Fn>
void write_file(const std::filesystem::path& path, Fn&& fn) {
  auto out = open_output(path);
  try {
    fn(out);
    out.close();
    if (!out) throw IoError("write failed");
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

template <typename Fn>
auto read_file(const std::filesystem::path& path, Fn&& fn) {
  auto in = open_input(path);
  try {
    return fn(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace

void export_scene(const Scene& scene, const std::filesystem::path& dir, const std::vector<double>* rough) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "label_2", ec);
  if (!ec) std::filesystem::create_directories(dir / "det_2", ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  std::vector<double> times;
  std::vector<EgoPose> slam;
  std::vector<EgoPose> truth_poses;
  for (const auto& f : scene.frames) {
    times.push_back(f.timestamp);
    slam.push_back(f.slam);
    truth_poses.push_back(f.truth);
  }
  write_file(dir / "calib.txt", [&](std::ostream& o) { write_calib(o, scene.camera); });
  write_file(dir / "times.txt", [&](std::ostream& o) { write_times(o, times); });
  write_file(dir / "poses.txt", [&](std::ostream& o) { write_poses(o, slam); });
  write_file(dir / "poses_gt.txt", [&](std::ostream& o) { write_poses(o, truth_poses); });

  const auto tracks = scene.tracks(rough);
  write_file(dir / "tracks.txt", [&](std::ostream& o) { write_tracks(o, tracks); });

  std::map<std::pair<std::int64_t, std::int64_t>, const Observation*> by_key;
  for (const auto& o : scene.observations) by_key[{o.track_id, o.frame}] = &o;
  std::vector<TruthRecord> truth;
  truth.reserve(scene.observations.size());
  for (const auto& [key, o] : by_key) {
    truth.push_back({o->track_id, o->frame, o->local.rad(), o->global.rad(), o->motion});
  }
  write_file(dir / "truth.txt", [&](std::ostream& o) { write_truth(o, truth); });

  std::map<std::int64_t, std::vector<LabeledObject>> gt;
  std::map<std::int64_t, std::vector<LabeledObject>> det;
  for (const auto& o : scene.observations) {
    gt[o.frame].push_back(label_of(o));
    LabeledObject d;
    d.truncated = o.truncation;
    d.occluded = o.occlusion;
    d.alpha = o.feature;
    d.box2d = o.box;
    d.box3d = {{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, Angle()};
    d.score = o.score;
    det[o.frame].push_back(d);
  }
  for (const auto& f : scene.frames) {
    write_label_file(dir / "label_2", f.frame, gt[f.frame]);
    write_label_file(dir / "det_2", f.frame, det[f.frame]);
  }
}

SceneFiles import_scene(const std::filesystem::path& dir) {
  SceneFiles s;
  s.camera = read_file(dir / "calib.txt", [](std::istream& i) { return read_calib(i); });
  s.times = read_file(dir / "times.txt", [](std::istream& i) { return read_times(i); });
  s.slam_poses = read_file(dir / "poses.txt", [](std::istream& i) { return read_poses(i); });
  s.true_poses = read_file(dir / "poses_gt.txt", [](std::istream& i) { return read_poses(i); });
  s.tracks = read_file(dir / "tracks.txt", [&](std::istream& i) { return read_tracks(i, s.camera); });
  s.truth = read_file(dir / "truth.txt", [](std::istream& i) { return read_truth(i); });
  attach_truth(s.tracks, s.truth);
  s.labels = read_label_dir(dir / "label_2");
  s.detections = read_label_dir(dir / "det_2");
  return s;
}

std::size_t attach_truth(std::vector<ObservationTrack>& tracks, const std::vector<TruthRecord>& truth) {
  std::map<std::pair<std::int64_t, std::int64_t>, double> by_key;
  for (const auto& t : truth) by_key[{t.track_id, t.frame}] = t.local;
  std::size_t attached = 0;
  for (auto& t : tracks) {
    for (auto& f : t.frames) {
      const auto it = by_key.find({t.track_id, f.frame});
      if (it != by_key.end()) {
        f.truth_local = it->second;
        ++attached;
      }
    }
  }
  return attached;
}

}  // namespace egoyaw
