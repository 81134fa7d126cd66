#include "endoscan/servo.hpp"

#include "endoscan/endoscope.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <optional>

namespace endoscan {

void ServoCalibration::validate() const {
  if (!(L_v_per_px > 0.0)) {
    throw ConfigError("servo scale L must be positive");
  }
  if (!(phi_rad > -kPi && phi_rad <= kPi)) {
    throw ConfigError("servo angle phi must lie in (-pi, pi]");
  }
}

void ServoGains::validate() const {
  if (!(kp_per_min >= 0.0) || !(ki_per_min2 >= 0.0)) {
    throw ConfigError("servo gains must be non-negative");
  }
  if (!(windup_limit_v_min > 0.0)) {
    throw ConfigError("anti-windup bound must be positive");
  }
}

Vec2 image_to_probe(const Vec2 &p_px, const ServoCalibration &cal) {
  return rotate_servo(p_px, cal.phi_rad) * cal.L_v_per_px;
}

PiOutput pi_step(const ServoState &state, const Vec2 &desired_v, const Vec2 &measured_v, const ServoGains &gains,
                 double dt_s, double now_s) {
  if (!(dt_s > 0.0)) {
    throw ConfigError("pi_step needs dt > 0");
  }
  const Vec2 e = desired_v - measured_v;
  const double dt_min = dt_s / 60.0;
  PiOutput out;
  out.state = state;
  const double lim = gains.windup_limit_v_min;
  out.state.integral_v_min.x = std::clamp(state.integral_v_min.x + e.x * dt_min, -lim, lim);
  out.state.integral_v_min.y = std::clamp(state.integral_v_min.y + e.y * dt_min, -lim, lim);
  out.state.last_update_s = now_s;
  out.correction_v = (e * gains.kp_per_min + out.state.integral_v_min * gains.ki_per_min2) * (1.0 / 60.0);
  return out;
}

Interlock::ScanGuard::ScanGuard(Interlock *lock) : lock_(lock) {
  if (lock_ && lock_->scanning_.exchange(true)) {
    lock_ = nullptr;
    throw InterlockError("a scan plan is already executing");
  }
}

Interlock::ScanGuard::~ScanGuard() {
  if (lock_) {
    lock_->scanning_.store(false);
  }
}

std::string to_string(ServoMode m) { return m == ServoMode::Open ? "open" : "closed"; }

ServoMode servo_mode_from_string(const std::string &s) {
  if (s == "open") {
    return ServoMode::Open;
  }
  if (s == "closed") {
    return ServoMode::Closed;
  }
  throw ConfigError("mode must be 'open' or 'closed', got '" + s + "'");
}

namespace {

Vec2 as_vec(const MotorCommand &c) { return {c.v1, c.v2}; }

double tracking_error_um(const RunLogRow &r, double um_per_v) { return (r.measured_v - r.desired_v).norm() * um_per_v; }

} // namespace

double RunLog::rms_tracking_error_um(double volts_to_tip_um_per_v) const {
  if (rows.empty()) {
    return 0.0;
  }
  double acc = 0.0;
  for (const auto &r : rows) {
    const double e = tracking_error_um(r, volts_to_tip_um_per_v);
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(rows.size()));
}

double RunLog::max_tracking_error_um(double volts_to_tip_um_per_v) const {
  double m = 0.0;
  for (const auto &r : rows) {
    m = std::max(m, tracking_error_um(r, volts_to_tip_um_per_v));
  }
  return m;
}

void write_runlog_csv(std::ostream &out, const RunLog &log) {
  out << "t_s,desired_x_v,desired_y_v,measured_x_v,measured_y_v,command_x_v,command_y_v,flags\n";
  out << std::fixed << std::setprecision(6);
  for (const auto &r : log.rows) {
    out << r.t_s << ',' << r.desired_v.x << ',' << r.desired_v.y << ',' << r.measured_v.x << ',' << r.measured_v.y
        << ',' << r.command_v.x << ',' << r.command_v.y << ',';
    for (std::size_t i = 0; i < r.flags.size(); ++i) {
      out << (i ? "|" : "") << r.flags[i];
    }
    out << '\n';
  }
}

RunLog servo_scan(const ScanPlan &plan, Plant &plant, Mosaicker &mosaicker, const ServoConfig &cfg) {
  if (plan.empty()) {
    throw PlanError(0, "cannot execute an empty plan");
  }
  cfg.calibration.validate();
  cfg.gains.validate();
  if (cfg.latency_ticks < 0 || cfg.latency_ticks > 1) {
    throw ConfigError("servo latency must be 0 or 1 ticks");
  }
  Interlock::ScanGuard guard(plant.interlock());

  const double fps = plant.frame_rate_hz();
  const double dt = 1.0 / fps;
  const bool closed = cfg.mode == ServoMode::Closed;
  const Vec2 v_start = as_vec(tip_to_volts(plan.points.front().pose(), cfg.geometry, cfg.workspace).value);
  const PositionEstimate p_start = mosaicker.position();

  RunLog log;
  ServoState state;
  Vec2 correction{};
  std::deque<Vec2> in_flight;
  int consecutive_failures = 0;

  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) / fps;
    const PlanLookup target = nearest_plan_point(plan, t);
    if (target.end_of_plan) {
      break;
    }
    const Vec2 desired = as_vec(tip_to_volts(target.point.pose(), cfg.geometry, cfg.workspace).value);
    const Vec2 cmd = closed ? desired + correction : desired;

    const Observation obs = plant.step({cmd.x, cmd.y}, t);
    const MosaicUpdate up = mosaicker.add(obs.pixels);
    const Vec2 p_i{static_cast<double>(up.position.x_px - p_start.x_px),
                   static_cast<double>(up.position.y_px - p_start.y_px)};
    const Vec2 measured = v_start + image_to_probe(p_i, cfg.calibration);

    RunLogRow row;
    row.t_s = t;
    row.desired_v = desired;
    row.measured_v = measured;
    row.command_v = cmd;
    if (obs.saturated) {
      row.flags.emplace_back("saturated");
    }
    if (obs.out_of_field) {
      row.flags.emplace_back("out_of_field");
    }

    Vec2 delta{};
    if (up.failed) {
      row.flags.emplace_back("registration_failed");
      ++log.registration_failures;
      if (++consecutive_failures > cfg.max_consecutive_failures) {
        log.rows.push_back(std::move(row));
        throw ServoAbort(k, "registration failed on " + std::to_string(consecutive_failures) +
                                " consecutive frames (frame " + std::to_string(k) + ")");
      }
    } else {
      consecutive_failures = 0;
      if (closed) {
        const PiOutput pi = pi_step(state, desired, measured, cfg.gains, dt, t);
        state = pi.state;
        delta = pi.correction_v;
      }
    }
    in_flight.push_back(delta);
    if (static_cast<int>(in_flight.size()) > cfg.latency_ticks) {
      correction += in_flight.front();
      in_flight.pop_front();
    }
    log.rows.push_back(std::move(row));
  }
  log.completed = true;
  return log;
}

double track_angle_rad(const std::vector<PositionEstimate> &track) {
  if (track.size() < 2) {
    throw CalibrationError("track too short to fit");
  }
  double mx = 0.0;
  double my = 0.0;
  for (const auto &p : track) {
    mx += static_cast<double>(p.x_px);
    my += static_cast<double>(p.y_px);
  }
  const double n = static_cast<double>(track.size());
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (const auto &p : track) {
    const double dx = static_cast<double>(p.x_px) - mx;
    const double dy = static_cast<double>(p.y_px) - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx + syy == 0.0) {
    throw CalibrationError("track did not move");
  }
  const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  Vec2 dir{std::cos(theta), std::sin(theta)};
  const Vec2 span{static_cast<double>(track.back().x_px - track.front().x_px),
                  static_cast<double>(track.back().y_px - track.front().y_px)};
  if (dir.dot(span) < 0.0) {
    dir = -dir;
  }
  return std::atan2(dir.y, dir.x);
}

namespace {

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  return a <= -kPi ? a + 2.0 * kPi : a;
}

} // namespace

PhiCalibrationResult calibrate_phi(const std::function<std::unique_ptr<Plant>()> &make_plant, const ServoConfig &cfg,
                                   const PhiCalibrationParams &params) {
  if (params.max_iterations < 1 || !(params.tolerance_deg > 0.0)) {
    throw ConfigError("phi calibration needs at least one iteration and a positive tolerance");
  }
  PhiCalibrationResult res;
  res.calibration.L_v_per_px =
      ServoCalibration::scale_from(cfg.geometry.volts_to_tip_um_per_v, params.mosaic_um_per_px);
  double phi = 0.0;
  for (int it = 0; it < params.max_iterations; ++it) {
    auto plant = make_plant();
    ScanParams sp;
    sp.point_frequency_hz = plant->frame_rate_hz();
    sp.speed_mm_per_s = params.speed_mm_per_s;
    sp.length_mm = params.scan_length_mm;
    sp.centre_mm = {cfg.workspace.centre.x_mm - 0.5 * params.scan_length_mm, cfg.workspace.centre.y_mm};
    ScanPlan plan = linear_scan(sp, cfg.workspace);
    // Scan along the current estimate of the image x axis.
    const Vec2 c = cfg.workspace.centre.as_vec();
    for (auto &p : plan.points) {
      const Vec2 q = c + rotate_servo(Vec2{p.x_mm, p.y_mm} - c, phi);
      p.x_mm = q.x;
      p.y_mm = q.y;
    }

    // Every frame is registered against the first one. Chaining consecutive
    // integer shifts would round the same sub-pixel motion the same way on
    // every frame and bias the angle.
    std::vector<PositionEstimate> track;
    {
      Interlock::ScanGuard guard(plant->interlock());
      NccRegistrar registrar(params.registration);
      std::optional<DiscResizer> resizer;
      for (const auto &pt : plan.points) {
        const MotorCommand v = tip_to_volts(pt.pose(), cfg.geometry, cfg.workspace).value;
        Image frame = plant->step(v, pt.t_s).pixels;
        const int d = params.registration.working_diameter_px;
        if (frame.width() != d) {
          if (!resizer || resizer->in_px() != frame.width()) {
            resizer.emplace(frame.width(), d);
          }
          frame = (*resizer)(frame);
        }
        if (!registrar.has_reference()) {
          registrar.set_reference(frame);
          track.push_back({});
          continue;
        }
        try {
          track.push_back(integrate({}, registrar.match(frame)));
        } catch (const RegistrationError &e) {
          throw CalibrationError(std::string("registration failed during calibration scan: ") + e.what());
        }
      }
    }
    const double alpha = track_angle_rad(track);
    res.track_angles_deg.push_back(rad_to_deg(alpha));
    res.iterations = it + 1;
    if (std::abs(rad_to_deg(alpha)) < params.tolerance_deg) {
      res.calibration.phi_rad = wrap_angle(phi);
      return res;
    }
    phi = wrap_angle(phi + alpha);
  }
  throw CalibrationError("phi calibration did not converge in " + std::to_string(params.max_iterations) +
                         " iterations");
}

} // namespace endoscan
