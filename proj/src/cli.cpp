#include "egoyaw/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "egoyaw/box_fitter.hpp"
#include "egoyaw/errors.hpp"
#include "egoyaw/estimator.hpp"
#include "egoyaw/evaluation.hpp"
#include "egoyaw/io.hpp"
#include "egoyaw/parallel.hpp"
#include "egoyaw/selfsup.hpp"
#include "egoyaw/simulator.hpp"

namespace fs = std::filesystem;

namespace egoyaw {

namespace {

// Bad input files or arguments.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Simple key=value / aligned-table report that can go to several sinks.
class Report {
 public:
  explicit Report(std::string format) : kv_(format == "kv") {}

  void value(const std::string& key, const std::string& v) {
    if (kv_) {
      text_ << key << '=' << v << '\n';
    } else {
      char buf[256];
      std::snprintf(buf, sizeof buf, "%-28s %s\n", key.c_str(), v.c_str());
      text_ << buf;
    }
  }
  void value(const std::string& key, double v, int precision = 4) { value(key, fixed(v, precision)); }
  void value(const std::string& key, std::size_t v) { value(key, std::to_string(v)); }
  void value(const std::string& key, const std::optional<double>& v, int precision = 4) {
    value(key, v ? fixed(*v, precision) : std::string("n/a"));
  }
  void line(const std::string& s) {
    if (!kv_) text_ << s << '\n';
  }
  bool kv() const { return kv_; }
  std::string str() const { return text_.str(); }

  static std::string fixed(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
  }

 private:
  bool kv_;
  std::ostringstream text_;
};

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

CameraIntrinsics load_calib(const fs::path& path) {
  try {
    auto in = open_input(path);
    return read_calib(in);
  } catch (const IoError& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

std::vector<ObservationTrack> load_tracks(const fs::path& path, const CameraIntrinsics& cam) {
  try {
    auto in = open_input(path);
    return read_tracks(in, cam);
  } catch (const IoError& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

// "rough" uses per-detection rough_local values from the track file,
// "identity" the appearance descriptor itself, anything else an estimator file.
std::unique_ptr<AngleEstimator> load_estimator(const std::string& spec,
                                               const std::vector<ObservationTrack>* tracks) {
  if (spec == "identity") return std::make_unique<IdentityEstimator>();
  if (spec == "rough") {
    if (tracks == nullptr) throw UsageError("estimator 'rough' needs a track file");
    auto tab = TabulatedEstimator::from_rough_estimates(*tracks);
    std::size_t frames = 0;
    for (const auto& t : *tracks) frames += t.size();
    if (tab.size() != frames) throw UsageError("estimator 'rough': some detections have no rough_local value");
    return std::make_unique<TabulatedEstimator>(std::move(tab));
  }
  try {
    auto in = open_input(spec);
    return read_estimator(in);
  } catch (const IoError& e) {
    throw UsageError(spec + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_output(path);
  out << text;
  out.close();
  if (!out) throw IoError("write failed: " + path.string());
}

fs::path resolve_config(const std::string& name) {
  const fs::path direct(name);
  if (fs::exists(direct)) return direct;
  if (direct.is_relative()) {
    if (const char* env = std::getenv("EGOYAW_CONFIG_PATH")) {
      std::stringstream dirs(env);
      std::string dir;
      while (std::getline(dirs, dir, ':')) {
        if (dir.empty()) continue;
        const fs::path candidate = fs::path(dir) / direct;
        if (fs::exists(candidate)) return candidate;
      }
    }
  }
  throw UsageError("config not found: " + name);
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  ScenarioConfig cfg;
  if (a.config.empty()) {
    cfg = default_scenario();
  } else {
    const fs::path path = resolve_config(a.config);
    try {
      cfg = load_scenario(path);
    } catch (const std::exception& e) {
      throw UsageError(path.string() + ": " + e.what());
    }
  }
  if (a.seed) cfg.seed = *a.seed;
  const Scene scene = generate_scene(cfg);
  const CorruptedEstimates rough = corrupt_estimates(scene, cfg.noise, cfg.seed);
  export_scene(scene, a.out, &rough.rough);
  write_text(fs::path(a.out) / "scenario.yaml", dump_scenario(cfg));

  std::size_t outliers = 0;
  for (bool o : rough.outlier) outliers += o ? 1 : 0;
  out << "frames " << scene.frames.size() << "\n";
  out << "vehicles " << scene.vehicles.size() << "\n";
  out << "tracks " << scene.tracks().size() << "\n";
  out << "detections " << scene.observations.size() << "\n";
  out << "rough_outliers " << outliers << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- targets

struct TargetsArgs {
  std::string tracks;
  std::string calib;
  std::string estimator = "rough";
  double t_p = 1.0;
  double t_r_deg = 1.0;
  std::string out;
  unsigned threads = 1;
};

int cmd_targets(const TargetsArgs& a, std::ostream& out) {
  Thresholds th{a.t_p, deg2rad(a.t_r_deg)};
  try {
    th.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const CameraIntrinsics cam = load_calib(a.calib);
  const auto tracks = load_tracks(a.tracks, cam);
  const auto est = load_estimator(a.estimator, &tracks);

  struct PerTrack {
    SelfSupTargets targets;
    bool removed = true;
    std::size_t pruned = 0;
  };
  std::vector<PerTrack> results(tracks.size());
  parallel_for(tracks.size(), resolve_threads(a.threads), [&](std::size_t i) {
    const AngleSequences seq = build_sequences(tracks[i], *est);
    const BiasEstimate b = estimate_bias(seq, th);
    results[i].removed = b.removed;
    results[i].pruned = seq.size() - b.kept.size();
    if (!b.removed) results[i].targets = compute_targets(tracks[i], b, seq);
  });

  std::vector<SelfSupTargets> kept;
  std::size_t removed = 0;
  std::size_t pruned = 0;
  std::size_t entries = 0;
  for (auto& r : results) {
    pruned += r.pruned;
    if (r.removed) {
      ++removed;
    } else {
      entries += r.targets.frames.size();
      kept.push_back(std::move(r.targets));
    }
  }
  {
    auto f = open_output(a.out);
    write_targets(f, kept);
    f.close();
    if (!f) throw IoError("write failed: " + a.out);
  }
  out << "tracks " << tracks.size() << "\n";
  out << "tracks_kept " << kept.size() << "\n";
  out << "tracks_removed " << removed << "\n";
  out << "entries_pruned " << pruned << "\n";
  out << "targets " << entries << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- cycle

struct CycleArgs {
  std::string tracks;
  std::string calib;
  std::string m0 = "rough";
  std::string truth;
  std::size_t cycles = 5;
  std::size_t bins = 72;
  double t_p = 1.0;
  double t_r_deg = 1.0;
  double beta_deg = 10.0;
  double validation = 0.2;
  std::uint64_t split_seed = 0;
  std::string out;
  std::string format = "text";
  unsigned threads = 1;
};

int cmd_cycle(const CycleArgs& a, std::ostream& out, std::ostream& err) {
  CycleConfig cfg;
  cfg.cycles = a.cycles;
  cfg.thresholds = {a.t_p, deg2rad(a.t_r_deg)};
  cfg.bins = a.bins;
  cfg.loss.beta = deg2rad(a.beta_deg);
  cfg.validation_fraction = a.validation;
  cfg.split_seed = a.split_seed;
  cfg.threads = resolve_threads(a.threads);
  try {
    cfg.thresholds.validate();
    cfg.loss.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (a.cycles == 0) throw UsageError("--cycles must be >= 1");
  if (a.bins == 0) throw UsageError("--bins must be >= 1");

  const CameraIntrinsics cam = load_calib(a.calib);
  auto tracks = load_tracks(a.tracks, cam);
  if (!a.truth.empty()) {
    try {
      auto in = open_input(a.truth);
      attach_truth(tracks, read_truth(in));
    } catch (const IoError& e) {
      throw UsageError(a.truth + ": " + e.what());
    }
  }
  const auto m0 = load_estimator(a.m0, &tracks);

  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw IoError("cannot create " + a.out + ": " + ec.message());

  const auto write_report = [&](const CycleResult& r) {
    Report rep(a.format);
    rep.line("cycle  median_error_deg  tracks_used  tracks_removed  entries_pruned  targets");
    const auto err_text = [](const std::optional<double>& e) {
      return e ? Report::fixed(*e, 3) : std::string("n/a");
    };
    if (rep.kv()) {
      rep.value("cycle0.median_error_deg", r.initial_error_deg, 6);
    } else {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%5d  %16s  %11s  %14s  %14s  %7s", 0, err_text(r.initial_error_deg).c_str(),
                    "-", "-", "-", "-");
      rep.line(buf);
    }
    for (std::size_t i = 0; i < r.cycles.size(); ++i) {
      const CycleRecord& c = r.cycles[i];
      if (rep.kv()) {
        const std::string p = "cycle" + std::to_string(i + 1) + ".";
        rep.value(p + "median_error_deg", c.median_error_deg, 6);
        rep.value(p + "tracks_used", c.tracks_used);
        rep.value(p + "tracks_removed", c.tracks_removed);
        rep.value(p + "entries_pruned", c.entries_pruned);
        rep.value(p + "targets", c.targets);
      } else {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%5zu  %16s  %11zu  %14zu  %14zu  %7zu", i + 1,
                      err_text(c.median_error_deg).c_str(), c.tracks_used, c.tracks_removed, c.entries_pruned,
                      c.targets);
        rep.line(buf);
      }
    }
    rep.value("train_tracks", r.train_tracks.size());
    rep.value("validation_tracks", r.validation_tracks.size());
    if (r.abort_reason) rep.value("aborted", *r.abort_reason);
    return rep.str();
  };

  const CycleResult result = run_cycles(tracks, *m0, cfg, [&](std::size_t i, const CycleRecord& rec) {
    auto f = open_output(fs::path(a.out) / ("M_" + std::to_string(i) + ".txt"));
    write_estimator(f, rec.model);
    f.close();
    if (!f) throw IoError("write failed: M_" + std::to_string(i));
  });
  const std::string report = write_report(result);
  write_text(fs::path(a.out) / "report.txt", report);
  out << report;
  if (result.aborted()) {
    err << "error: " << *result.abort_reason << "\n";
    return kExitPipeline;
  }
  return kExitOk;
}

// ------------------------------------------------------------------- fit3d

struct Fit3dArgs {
  std::string detections;
  std::string calib;
  std::string estimator = "identity";
  double prior_h = 1.53;
  double prior_w = 1.63;
  double prior_l = 3.88;
  double z_init = 30.0;
  std::string out;
  unsigned threads = 1;
};

int cmd_fit3d(const Fit3dArgs& a, std::ostream& out, std::ostream& err) {
  const CameraIntrinsics cam = load_calib(a.calib);
  VehicleSizePrior prior{a.prior_h, a.prior_w, a.prior_l};
  FitConfig fit;
  fit.z_init = a.z_init;
  try {
    prior.validate();
    fit.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (a.estimator == "rough") throw UsageError("fit3d: detections carry no track ids; use a model file or 'identity'");
  const auto est = load_estimator(a.estimator, nullptr);

  std::map<std::int64_t, std::vector<LabeledObject>> frames;
  try {
    frames = read_label_dir(a.detections);
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw IoError("cannot create " + a.out + ": " + ec.message());

  std::size_t total = 0;
  std::size_t written = 0;
  std::size_t failed = 0;
  std::size_t not_converged = 0;
  for (const auto& [frame, dets] : frames) {
    std::vector<Detection2D> inputs;
    inputs.reserve(dets.size());
    for (const auto& d : dets) {
      inputs.push_back({d.box2d, d.score.value_or(1.0), CropDescriptor{d.alpha, -1, frame}});
    }
    const DetectionFitReport rep = detections_to_boxes(inputs, *est, prior, cam, fit, resolve_threads(a.threads));
    std::vector<LabeledObject> labels;
    for (const auto& b : rep.boxes) {
      const LabeledObject& src = dets[b.source];
      LabeledObject l;
      l.type = src.type;
      l.truncated = src.truncated;
      l.occluded = src.occluded;
      l.alpha = b.local;
      l.box2d = b.box2d;
      l.box3d = b.box3d;
      l.score = src.score.value_or(1.0);
      labels.push_back(l);
    }
    if (rep.failed + rep.not_converged > 0) {
      err << "frame " << frame << ": " << rep.failed << " failed, " << rep.not_converged << " not converged\n";
    }
    write_label_file(a.out, frame, labels);
    total += dets.size();
    written += labels.size();
    failed += rep.failed;
    not_converged += rep.not_converged;
  }
  out << "frames " << frames.size() << "\n";
  out << "detections " << total << "\n";
  out << "boxes " << written << "\n";
  out << "failed " << failed << "\n";
  out << "not_converged " << not_converged << "\n";
  return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string metric = "ap";
  int interp = 40;
  std::string format = "text";
  std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  std::map<std::int64_t, std::vector<LabeledObject>> pred;
  std::map<std::int64_t, std::vector<LabeledObject>> gt;
  try {
    pred = read_label_dir(a.pred);
    gt = read_label_dir(a.gt);
  } catch (const IoError& e) {
    throw UsageError(e.what());
  }
  std::vector<std::int64_t> only_pred;
  std::vector<std::int64_t> only_gt;
  for (const auto& [id, v] : pred) {
    if (!gt.contains(id)) only_pred.push_back(id);
  }
  for (const auto& [id, v] : gt) {
    if (!pred.contains(id)) only_gt.push_back(id);
  }
  if (!only_pred.empty() || !only_gt.empty()) {
    err << "error: frame ids differ between prediction and ground-truth directories\n";
    for (auto id : only_pred) err << "  prediction only: " << frame_file_name(id) << "\n";
    for (auto id : only_gt) err << "  ground truth only: " << frame_file_name(id) << "\n";
    return kExitUsage;
  }

  std::vector<FrameObjects> frames;
  std::size_t gt_total = 0;
  std::size_t pred_total = 0;
  for (const auto& [id, g] : gt) {
    frames.push_back({pred[id], g});
    gt_total += g.size();
    pred_total += pred[id].size();
  }

  const MatchCriteria crit;
  Report rep(a.format);
  rep.value("frames", frames.size());
  rep.value("predictions", pred_total);
  rep.value("ground_truth", gt_total);

  if (a.metric == "angle") {
    std::vector<Angle> p;
    std::vector<Angle> t;
    std::size_t matched = 0;
    for (std::size_t f = 0; f < frames.size(); ++f) {
      for (const auto& m : greedy_match_2d(frames[f], f, crit.iou_2d_match)) {
        p.push_back(frames[f].pred[m.pred].alpha);
        t.push_back(frames[f].gt[m.gt].alpha);
        ++matched;
      }
    }
    rep.value("matched", matched);
    rep.value("median_local_angle_error_deg",
              p.empty() ? std::optional<double>{} : std::optional<double>{median_angle_error_deg(p, t)});
  } else if (a.metric == "components") {
    const ComponentErrors c = component_errors(frames, crit);
    rep.value("matched", c.matched);
    rep.value("unmatched_pred", c.unmatched_pred);
    rep.value("unmatched_gt", c.unmatched_gt);
    rep.value("h_m", c.h);
    rep.value("w_m", c.w);
    rep.value("l_m", c.l);
    rep.value("x_m", c.x);
    rep.value("y_m", c.y);
    rep.value("z_m", c.z);
    rep.value("yaw_deg", c.yaw_deg);
  } else {
    const ApInterpolation interp = a.interp == 11 ? ApInterpolation::k11Point : ApInterpolation::k40Point;
    if (gt_total == 0) err << "warning: no ground truth objects; AP is 0\n";
    rep.value("interpolation", std::to_string(a.interp) + "-point");
    rep.line("mode  easy     moderate hard");
    for (ApMode mode : {ApMode::k2D, ApMode::kBev, ApMode::k3D}) {
      std::string row = ap_mode_name(mode);
      row.resize(6, ' ');
      for (Difficulty d : {Difficulty::kEasy, Difficulty::kModerate, Difficulty::kHard}) {
        const ApResult r = average_precision(frames, mode, d, crit, interp);
        if (rep.kv()) {
          rep.value(std::string("ap_") + ap_mode_name(mode) + "_" + difficulty_name(d), r.ap, 6);
        } else {
          row += Report::fixed(r.ap, 4) + "   ";
        }
      }
      rep.line(row);
    }
  }
  const std::string text = rep.str();
  out << text;
  if (!a.out.empty()) write_text(a.out, text);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-supervised vehicle orientation toolkit", "egoyaw"};
  app.require_subcommand(1);
  app.fallthrough();
  unsigned threads = 1;
  app.add_option("--threads", threads, "Worker threads (0 = all cores); results do not depend on it");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic scene and export its files");
  simulate->add_option("--config", sim.config,
                       "Scenario YAML; relative names are also searched in $EGOYAW_CONFIG_PATH (default: built-in)");
  simulate->add_option("--seed", sim.seed, "Override the scenario seed");
  simulate->add_option("--out", sim.out, "Output directory")->required();

  TargetsArgs tgt;
  auto* targets = app.add_subcommand("targets", "Compute self-supervised local-angle targets");
  targets->add_option("--tracks", tgt.tracks, "Track file")->required();
  targets->add_option("--calib", tgt.calib, "Calibration file with a P2 line")->required();
  targets->add_option("--estimator", tgt.estimator, "Model file, 'rough' (track file column) or 'identity'");
  targets->add_option("--t_p", tgt.t_p, "Pruning ratio threshold (>= 1)");
  targets->add_option("--t_r", tgt.t_r_deg, "Removal threshold in degrees");
  targets->add_option("--out", tgt.out, "Targets output file")->required();

  CycleArgs cyc;
  auto* cycle = app.add_subcommand("cycle", "Iterate targets and estimator fits");
  cycle->add_option("--tracks", cyc.tracks, "Track file")->required();
  cycle->add_option("--calib", cyc.calib, "Calibration file with a P2 line")->required();
  cycle->add_option("--m0", cyc.m0, "Initial model: file, 'rough' or 'identity'");
  cycle->add_option("--truth", cyc.truth, "Ground truth file for the per-cycle error table");
  cycle->add_option("--cycles", cyc.cycles, "Number of cycles");
  cycle->add_option("--bins", cyc.bins, "Estimator bins");
  cycle->add_option("--t_p", cyc.t_p, "Pruning ratio threshold (>= 1)");
  cycle->add_option("--t_r", cyc.t_r_deg, "Removal threshold in degrees");
  cycle->add_option("--beta", cyc.beta_deg, "Smooth-L1 quadratic half-width in degrees");
  cycle->add_option("--validation", cyc.validation, "Validation track fraction");
  cycle->add_option("--split-seed", cyc.split_seed, "Train/validation split seed");
  cycle->add_option("--format", cyc.format, "Report format")->check(CLI::IsMember({"text", "kv"}));
  cycle->add_option("--out", cyc.out, "Output directory")->required();

  Fit3dArgs fit;
  auto* fit3d = app.add_subcommand("fit3d", "Fit 3D boxes to 2D detections");
  fit3d->add_option("--detections", fit.detections, "Directory of KITTI-layout detection files")->required();
  fit3d->add_option("--calib", fit.calib, "Calibration file with a P2 line")->required();
  fit3d->add_option("--estimator", fit.estimator, "Model file or 'identity'");
  fit3d->add_option("--prior-h", fit.prior_h, "Box height (m)");
  fit3d->add_option("--prior-w", fit.prior_w, "Box width (m)");
  fit3d->add_option("--prior-l", fit.prior_l, "Box length (m)");
  fit3d->add_option("--z-init", fit.z_init, "Initial depth (m)");
  fit3d->add_option("--out", fit.out, "Output label directory")->required();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Evaluate predictions against ground truth");
  eval->add_option("--pred", ev.pred, "Prediction label directory")->required();
  eval->add_option("--gt", ev.gt, "Ground truth label directory")->required();
  eval->add_option("--metric", ev.metric, "Metric")->check(CLI::IsMember({"angle", "components", "ap"}));
  eval->add_option("--interp", ev.interp, "AP interpolation points")->check(CLI::IsMember({11, 40}));
  eval->add_option("--format", ev.format, "Report format")->check(CLI::IsMember({"text", "kv"}));
  eval->add_option("--out", ev.out, "Also write the report to this file");

  auto* version = app.add_subcommand("version", "Print tool and file format versions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim, out);
    if (targets->parsed()) {
      tgt.threads = threads;
      return cmd_targets(tgt, out);
    }
    if (cycle->parsed()) {
      cyc.threads = threads;
      return cmd_cycle(cyc, out, err);
    }
    if (fit3d->parsed()) {
      fit.threads = threads;
      return cmd_fit3d(fit, out, err);
    }
    if (eval->parsed()) return cmd_eval(ev, out, err);
    if (version->parsed()) {
      out << "egoyaw " << kVersion << "\n";
      out << "tracks " << kTrackFormatVersion << "\n";
      out << "targets " << kTargetFormatVersion << "\n";
      out << "estimator " << kEstimatorFormatVersion << "\n";
      out << "scenario " << kScenarioFormatVersion << "\n";
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitPipeline;
  }
  return kExitUsage;
}

}  // namespace egoyaw
