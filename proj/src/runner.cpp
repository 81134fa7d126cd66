#include "endoscan/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace endoscan {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void write_json(const std::filesystem::path &path, const json &j) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << j.dump(2) << '\n';
}

void write_runlog(const std::filesystem::path &path, const RunLog &log) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  write_runlog_csv(out, log);
}

double min_consecutive_overlap(const std::vector<PositionEstimate> &track, double um_per_px, double fov_um) {
  double m = 1.0;
  for (std::size_t i = 1; i < track.size(); ++i) {
    const double dx = static_cast<double>(track[i].x_px - track[i - 1].x_px);
    const double dy = static_cast<double>(track[i].y_px - track[i - 1].y_px);
    m = std::min(m, disc_overlap_fraction(std::hypot(dx, dy) * um_per_px, fov_um));
  }
  return m;
}

Metrics collect_metrics(const ScenarioConfig &cfg, const ScanPlan &plan, ServoMode mode, const RunLog &log,
                        Mosaicker &mosaicker, const ServoCalibration &cal) {
  Metrics m;
  m.commanded_diameter_mm = commanded_diameter_mm(plan, cfg.probe.fov_diameter_um);
  m.scenario = cfg.name;
  m.mode = mode;
  const double um_per_v = cfg.scanner.volts_to_tip_um_per_v;
  m.rms_tracking_error_um = log.rms_tracking_error_um(um_per_v);
  m.max_tracking_error_um = log.max_tracking_error_um(um_per_v);
  const MosaicCanvas &canvas = mosaicker.canvas();
  m.mosaic_diameter_mm = measure_mosaic_diameter_mm(canvas);
  const double px_mm = canvas.um_per_px() * 1e-3;
  m.coverage_area_mm2 = static_cast<double>(canvas.valid_count()) * px_mm * px_mm;
  m.frames_processed = mosaicker.frames();
  m.registration_failures = log.registration_failures;
  m.simulated_duration_s = log.rows.empty() ? 0.0 : log.rows.back().t_s;
  m.min_frame_overlap = min_consecutive_overlap(mosaicker.trajectory(), canvas.um_per_px(), cfg.probe.fov_diameter_um);
  m.phi_deg = rad_to_deg(cal.phi_rad);
  if (cfg.phantom.kind == PhantomKind::Grid) {
    try {
      m.grid = measure_grid(canvas, cfg.phantom.grid);
    } catch (const Error &e) {
      m.grid_error = e.what();
    }
  }
  return m;
}

} // namespace

json metrics_json(const Metrics &m) {
  json j;
  j["scenario"] = m.scenario;
  j["mode"] = to_string(m.mode);
  j["rms_tracking_error_um"] = m.rms_tracking_error_um;
  j["max_tracking_error_um"] = m.max_tracking_error_um;
  j["mosaic_diameter_mm"] = m.mosaic_diameter_mm;
  j["commanded_diameter_mm"] = m.commanded_diameter_mm;
  if (m.grid) {
    j["grid_measurements_um"] = {{"line_thickness_mean", m.grid->thickness_mean_um},
                                 {"line_thickness_sd", m.grid->thickness_sd_um},
                                 {"line_thickness_count", m.grid->thickness_count},
                                 {"square_width_mean", m.grid->width_mean_um},
                                 {"square_width_sd", m.grid->width_sd_um},
                                 {"square_width_count", m.grid->width_count}};
  } else if (!m.grid_error.empty()) {
    j["grid_measurements_um"] = {{"error", m.grid_error}};
  } else {
    j["grid_measurements_um"] = nullptr;
  }
  j["coverage_area_mm2"] = m.coverage_area_mm2;
  j["frames_processed"] = m.frames_processed;
  j["registration_failures"] = m.registration_failures;
  j["simulated_duration_s"] = m.simulated_duration_s;
  j["min_frame_overlap"] = m.min_frame_overlap;
  j["phi_deg"] = m.phi_deg;
  return j;
}

json timing_json(const Timing &t) { return {{"wall_s", t.wall_s}, {"throughput_fps", t.throughput_fps}}; }

ScanPlan build_plan(const ScenarioConfig &cfg) {
  switch (cfg.plan.kind) {
  case PlanKind::Linear:
    return linear_scan(cfg.plan.params, cfg.workspace);
  case PlanKind::Raster:
    return raster_scan(cfg.plan.params, cfg.plan.rows, cfg.plan.row_spacing_mm, cfg.workspace);
  case PlanKind::Spiral:
    break;
  }
  return spiral_scan(cfg.plan.params, cfg.workspace, cfg.probe.fov_diameter_um * 1e-3);
}

ServoConfig servo_config(const ScenarioConfig &cfg, const ServoCalibration &cal) {
  ServoConfig s;
  s.mode = cfg.mode;
  s.calibration = cal;
  s.gains = cfg.servo.gains;
  s.latency_ticks = cfg.servo.latency_ticks;
  s.max_consecutive_failures = cfg.servo.max_consecutive_failures;
  s.geometry = cfg.scanner;
  s.workspace = cfg.workspace;
  return s;
}

std::unique_ptr<Mosaicker> build_mosaicker(const ScenarioConfig &cfg) {
  return std::make_unique<Mosaicker>(cfg.mosaic.registration, cfg.mosaic.canvas_px, cfg.mosaic_um_per_px(),
                                     cfg.mosaic.auto_grow);
}

PhiCalibrationResult run_phi_calibration(const ScenarioConfig &cfg) {
  // Shared rigid scene; every iteration gets a fresh instrument around a copy.
  const Scene scene = build_scene(cfg);
  PhiCalibrationParams params;
  params.registration = cfg.mosaic.registration;
  params.mosaic_um_per_px = cfg.mosaic_um_per_px();
  return calibrate_phi([&]() -> std::unique_ptr<Plant> { return build_instrument(cfg, scene, true); },
                       servo_config(cfg, {}), params);
}

ServoCalibration scenario_calibration(const ScenarioConfig &cfg) {
  if (cfg.servo.calibration == CalibrationSource::Run) {
    return run_phi_calibration(cfg).calibration;
  }
  ServoCalibration cal;
  cal.phi_rad = deg_to_rad(cfg.servo.phi_deg);
  cal.L_v_per_px = ServoCalibration::scale_from(cfg.scanner.volts_to_tip_um_per_v, cfg.mosaic_um_per_px());
  cal.validate();
  return cal;
}

double commanded_diameter_mm(const ScanPlan &plan, double fov_um) {
  double best2 = 0.0;
  for (std::size_t i = 0; i < plan.points.size(); ++i) {
    for (std::size_t j = i + 1; j < plan.points.size(); ++j) {
      const double dx = plan.points[i].x_mm - plan.points[j].x_mm;
      const double dy = plan.points[i].y_mm - plan.points[j].y_mm;
      best2 = std::max(best2, dx * dx + dy * dy);
    }
  }
  return std::sqrt(best2) + fov_um * 1e-3;
}

double disc_overlap_fraction(double d, double fov) {
  const double r = 0.5 * fov;
  if (d >= fov) {
    return 0.0;
  }
  const double lens = 2.0 * r * r * std::acos(d / (2.0 * r)) - 0.5 * d * std::sqrt(4.0 * r * r - d * d);
  return lens / (kPi * r * r);
}

ScanRun run_scan(const ScenarioConfig &cfg, const std::optional<std::filesystem::path> &out_dir) {
  const auto t0 = Clock::now();
  const ServoCalibration cal = scenario_calibration(cfg);
  auto inst = build_instrument(cfg);
  const ScanPlan plan = build_plan(cfg);
  inst->move_to(plan.points.front().pose());
  auto mosaicker = build_mosaicker(cfg);

  ScanRun run;
  run.log = servo_scan(plan, *inst, *mosaicker, servo_config(cfg, cal));
  run.metrics = collect_metrics(cfg, plan, cfg.mode, run.log, *mosaicker, cal);
  run.timing.wall_s = seconds_since(t0);
  run.timing.throughput_fps = static_cast<double>(run.metrics.frames_processed) / run.timing.wall_s;

  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    save_mosaic(mosaicker->canvas(), mosaicker->trajectory(), *out_dir / "mosaic.pgm", *out_dir / "mosaic.json");
    write_runlog(*out_dir / "runlog.csv", run.log);
    write_json(*out_dir / "metrics.json", metrics_json(run.metrics));
    write_json(*out_dir / "timing.json", timing_json(run.timing));
  }
  return run;
}

json ablation_json(const AblationReport &r) {
  json j;
  j["scan"] = metrics_json(r.scan);
  j["rescan"] = metrics_json(r.rescan);
  j["centre_tip_mm"] = {r.centre_tip.x_mm, r.centre_tip.y_mm};
  j["fire_tip_mm"] = {r.fire_tip.x_mm, r.fire_tip.y_mm};
  j["recentre_looks"] = r.recentre_looks;
  j["mark_centre_um"] = {r.mark.centre_um.x, r.mark.centre_um.y};
  j["mark_found"] = r.mark_found;
  j["mosaic_centre_px"] = {r.mosaic_centre_px.x, r.mosaic_centre_px.y};
  j["mark_centroid_px"] = {r.mark_centroid_px.x, r.mark_centroid_px.y};
  j["centroid_offset_px"] = r.centroid_offset_px;
  j["mark_diameter_um"] = r.mark_diameter_um;
  return j;
}

AblationReport run_ablation(const ScenarioConfig &cfg, const std::optional<std::filesystem::path> &out_dir) {
  const ServoCalibration cal = scenario_calibration(cfg);
  auto inst = build_instrument(cfg);
  const ScanPlan plan = build_plan(cfg);
  const double fps = inst->frame_rate_hz();
  AblationReport rep;

  const TipPose start = plan.points.front().pose();
  const auto volts_at = [&](const TipPose &tip) { return tip_to_volts(tip, cfg.scanner, cfg.workspace).value; };

  // Survey scan in the scenario's mode. The frame at the plan start is kept:
  // its centre is the mosaic centre.
  inst->move_to(start);
  const Image centre_frame = inst->step(volts_at(start), 0.0).pixels;
  auto survey = build_mosaicker(cfg);
  const RunLog scan_log = servo_scan(plan, *inst, *survey, servo_config(cfg, cal));
  rep.scan = collect_metrics(cfg, plan, cfg.mode, scan_log, *survey, cal);

  // The mosaic centre is the plan start; the standing correction of the
  // controller says where the actuators have to go to see it.
  const RunLogRow &last = scan_log.rows.back();
  const Vec2 offset_v = last.command_v - last.desired_v;
  const double mm_per_v = cfg.scanner.volts_to_tip_um_per_v * 1e-3;
  rep.centre_tip = {start.x_mm + offset_v.x * mm_per_v, start.y_mm + offset_v.y * mm_per_v};

  // The correction also carries dead-reckoning drift of the survey, so look
  // again and register directly against the centre frame until it matches.
  double t = scan_log.rows.back().t_s;
  for (int i = 0; i < 4; ++i) {
    inst->move_to(rep.centre_tip);
    t += 1.0 / fps;
    const Observation look = inst->step(volts_at(rep.centre_tip), t);
    const RegistrationResult r = register_frames(centre_frame, look.pixels, cfg.mosaic.registration);
    ++rep.recentre_looks;
    if (r.shift == Shift{}) {
      break;
    }
    const Vec2 dv = image_to_probe({static_cast<double>(r.shift.dx), static_cast<double>(r.shift.dy)}, cal);
    rep.centre_tip = {rep.centre_tip.x_mm - dv.x * mm_per_v, rep.centre_tip.y_mm - dv.y * mm_per_v};
  }
  rep.fire_tip = target_centre(rep.centre_tip, cfg.ablation, cfg.workspace);
  inst->move_to(rep.fire_tip);
  rep.mark = inst->fire(cfg.ablation);

  // Inspection rescan, open loop.
  inst->move_to(plan.points.front().pose());
  auto rescan = build_mosaicker(cfg);
  ServoConfig open = servo_config(cfg, cal);
  open.mode = ServoMode::Open;
  const RunLog rescan_log = servo_scan(plan, *inst, *rescan, open);
  rep.rescan = collect_metrics(cfg, plan, ServoMode::Open, rescan_log, *rescan, cal);

  const MosaicCanvas &canvas = rescan->canvas();
  rep.mosaic_centre_px = canvas.centre_px();
  const double search_px = cfg.ablation.mark_diameter_um / canvas.um_per_px();
  if (const auto disc = measure_dark_disc(canvas, rep.mosaic_centre_px, 0.02, search_px)) {
    rep.mark_found = true;
    rep.mark_centroid_px = disc->centroid_px;
    rep.centroid_offset_px = (disc->centroid_px - rep.mosaic_centre_px).norm();
    rep.mark_diameter_um = disc->diameter_um;
  }

  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    RunLog combined = scan_log;
    const double t_fire = t + 1.0 / fps;
    RunLogRow fire_row;
    fire_row.t_s = t_fire;
    const MotorCommand fire_v = volts_at(rep.fire_tip);
    fire_row.command_v = {fire_v.v1, fire_v.v2};
    fire_row.desired_v = fire_row.command_v;
    fire_row.measured_v = fire_row.command_v;
    char buf[96];
    const Vec2 at = fibre_axis_um(rep.fire_tip, cfg.ablation);
    std::snprintf(buf, sizeof buf, "fire:%.3f:%.3f", at.x, at.y);
    fire_row.flags.emplace_back(buf);
    combined.rows.push_back(fire_row);
    for (RunLogRow r : rescan_log.rows) {
      r.t_s += t_fire + 1.0 / fps;
      r.flags.emplace_back("rescan");
      combined.rows.push_back(std::move(r));
    }
    combined.registration_failures += rescan_log.registration_failures;
    write_runlog(*out_dir / "runlog.csv", combined);
    save_mosaic(survey->canvas(), survey->trajectory(), *out_dir / "survey_mosaic.pgm",
                *out_dir / "survey_mosaic.json");
    save_mosaic(canvas, rescan->trajectory(), *out_dir / "mosaic.pgm", *out_dir / "mosaic.json");
    write_json(*out_dir / "metrics.json", ablation_json(rep));
  }
  return rep;
}

json sweep_json(const SweepMetrics &m) {
  return {{"grid_n", m.grid_n},
          {"commanded_spacing_um", m.commanded_spacing_um},
          {"neighbour_mean_um", m.neighbour_mean_um},
          {"neighbour_iqr_um", m.neighbour_iqr_um},
          {"pairs", m.pairs}};
}

namespace {

// Linear-interpolated quantile of sorted data.
double quantile(const std::vector<double> &sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const std::size_t j = std::min(i + 1, sorted.size() - 1);
  return sorted[i] + (pos - static_cast<double>(i)) * (sorted[j] - sorted[i]);
}

} // namespace

SweepMetrics workspace_sweep(const ScenarioConfig &cfg) {
  const int n = cfg.sweep.grid_n;
  const double hw = cfg.workspace.half_width_mm;
  const double step = 2.0 * hw / (n - 1);
  Rng rng(cfg.seed ^ 0xA0761D6478BD642FULL);
  std::vector<Vec2> reached(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const TipPose target{cfg.workspace.centre.x_mm - hw + i * step, cfg.workspace.centre.y_mm - hw + j * step};
      const MotorCommand v = tip_to_volts(target, cfg.scanner, cfg.workspace).value;
      const Vec2 tip_um = volts_to_tip(v, cfg.scanner, cfg.workspace).value.as_vec() * 1000.0;
      const double ex = cfg.sweep.actuation_noise_um * rng.normal();
      const double ey = cfg.sweep.actuation_noise_um * rng.normal();
      reached[static_cast<std::size_t>(j) * n + i] = tip_um + Vec2{ex, ey};
    }
  }
  std::vector<double> d;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Vec2 &p = reached[static_cast<std::size_t>(j) * n + i];
      if (i + 1 < n) {
        d.push_back((reached[static_cast<std::size_t>(j) * n + i + 1] - p).norm());
      }
      if (j + 1 < n) {
        d.push_back((reached[static_cast<std::size_t>(j + 1) * n + i] - p).norm());
      }
    }
  }
  std::sort(d.begin(), d.end());
  SweepMetrics m;
  m.grid_n = n;
  m.commanded_spacing_um = step * 1000.0;
  double sum = 0.0;
  for (const double x : d) {
    sum += x;
  }
  m.neighbour_mean_um = sum / static_cast<double>(d.size());
  m.neighbour_iqr_um = quantile(d, 0.75) - quantile(d, 0.25);
  m.pairs = d.size();
  return m;
}

std::vector<FramePair> generate_corpus(std::size_t pairs, int frame_px, std::uint64_t seed, double max_shift_um) {
  const Scene scene = make_texture(seed, 1.4, 20.0);
  ProbeSpec spec;
  spec.frame_px = frame_px;
  const Endoscope scope(spec);
  Rng rng(seed + 1);
  std::vector<FramePair> out;
  out.reserve(pairs);
  for (std::size_t k = 0; k < pairs; ++k) {
    const TipPose a{rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)};
    const TipPose b{a.x_mm + rng.uniform(-max_shift_um, max_shift_um) * 1e-3,
                    a.y_mm + rng.uniform(-max_shift_um, max_shift_um) * 1e-3};
    out.emplace_back(scope.capture(scene, a, 0.0).pixels, scope.capture(scene, b, 0.0).pixels);
  }
  return out;
}

void write_corpus(const std::filesystem::path &dir, const std::vector<FramePair> &pairs) {
  std::filesystem::create_directories(dir);
  char name[64];
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    std::snprintf(name, sizeof name, "pair_%05zu_a.pgm", k);
    write_pgm8(dir / name, pairs[k].first);
    std::snprintf(name, sizeof name, "pair_%05zu_b.pgm", k);
    write_pgm8(dir / name, pairs[k].second);
  }
}

std::vector<FramePair> load_corpus(const std::filesystem::path &dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error("corpus directory not found: " + dir.string());
  }
  std::map<std::string, std::filesystem::path> firsts;
  for (const auto &e : std::filesystem::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() > 6 && name.compare(name.size() - 6, 6, "_a.pgm") == 0) {
      firsts[name.substr(0, name.size() - 6)] = e.path();
    }
  }
  std::vector<FramePair> out;
  for (const auto &[stem, a] : firsts) {
    const auto b = dir / (stem + "_b.pgm");
    if (!std::filesystem::exists(b)) {
      throw Error("corpus pair is missing its second frame: " + b.string());
    }
    out.emplace_back(read_pgm(a), read_pgm(b));
  }
  return out;
}

json bench_json(const BenchResult &b) {
  return {{"pairs", b.pairs}, {"frame_px", b.frame_px}, {"mean_ms", b.mean_ms}, {"p99_ms", b.p99_ms}, {"fps", b.fps}};
}

BenchResult bench_registration(const std::vector<FramePair> &corpus, const RegistrationParams &params) {
  if (corpus.empty()) {
    throw Error("benchmark corpus is empty");
  }
  NccRegistrar reg(params);
  const DiscResizer resize(corpus.front().first.width(), params.working_diameter_px);
  auto one = [&](const FramePair &p) {
    reg.set_reference(resize(p.first));
    try {
      reg.match(resize(p.second));
    } catch (const RegistrationError &) {
      // Featureless pairs still cost a full correlation.
    }
  };
  for (std::size_t k = 0; k < std::min<std::size_t>(10, corpus.size()); ++k) {
    one(corpus[k]);
  }
  std::vector<double> ms;
  ms.reserve(corpus.size());
  for (const auto &p : corpus) {
    const auto t0 = Clock::now();
    one(p);
    ms.push_back(seconds_since(t0) * 1e3);
  }
  BenchResult b;
  b.pairs = corpus.size();
  b.frame_px = corpus.front().first.width();
  double sum = 0.0;
  for (const double x : ms) {
    sum += x;
  }
  b.mean_ms = sum / static_cast<double>(ms.size());
  std::sort(ms.begin(), ms.end());
  const auto idx = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(ms.size()))) - 1;
  b.p99_ms = ms[std::min(idx, ms.size() - 1)];
  b.fps = 1e3 / b.mean_ms;
  return b;
}

std::pair<double, double> drag_diameters_mm(ScenarioConfig cfg, double drag_coefficient) {
  cfg.deformation.drag_coefficient = drag_coefficient;
  cfg.mode = ServoMode::Open;
  const double open = run_scan(cfg).metrics.mosaic_diameter_mm;
  cfg.mode = ServoMode::Closed;
  const double closed = run_scan(cfg).metrics.mosaic_diameter_mm;
  return {open, closed};
}

DragCalibration calibrate_drag(const ScenarioConfig &cfg, double target_ratio, double tol, int max_iterations) {
  double lo = 0.0;
  double hi = 0.6;
  DragCalibration best;
  double best_err = 1e300;
  for (int it = 0; it < max_iterations; ++it) {
    const double c = 0.5 * (lo + hi);
    const auto [open, closed] = drag_diameters_mm(cfg, c);
    const double ratio = open / closed;
    const double err = std::abs(ratio - target_ratio);
    if (err < best_err) {
      best_err = err;
      best = {c, ratio, open, closed, it + 1};
    }
    best.iterations = it + 1;
    if (err < tol) {
      break;
    }
    // More drag shrinks the open-loop mosaic.
    if (ratio > target_ratio) {
      lo = c;
    } else {
      hi = c;
    }
  }
  return best;
}

} // namespace endoscan
