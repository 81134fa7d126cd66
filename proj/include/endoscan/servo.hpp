#pragma once

#include "endoscan/image.hpp"
#include "endoscan/kinematics.hpp"
#include "endoscan/mosaic.hpp"
#include "endoscan/trajectory.hpp"

#include <atomic>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace endoscan {

// Image-to-actuator transform: p_v = L * [cos phi, sin phi; -sin phi, cos phi] * p_I.
struct ServoCalibration {
  double phi_rad = 0.0;
  double L_v_per_px = 1.2 / 664.0;

  void validate() const;
  // L from the end-to-end actuator scale and the mosaic pixel size.
  static double scale_from(double volts_to_tip_um_per_v, double mosaic_um_per_px) {
    return mosaic_um_per_px / volts_to_tip_um_per_v;
  }
};

struct ServoGains {
  double kp_per_min = 10.0;
  double ki_per_min2 = 0.4;
  // Anti-windup bound on each accumulator axis.
  double windup_limit_v_min = 0.5;

  void validate() const;
};

struct ServoState {
  Vec2 integral_v_min{};
  double last_update_s = 0.0;
};

Vec2 image_to_probe(const Vec2 &p_px, const ServoCalibration &cal);

struct PiOutput {
  Vec2 correction_v{};
  ServoState state;
};

// e = desired - measured; the accumulator integrates e over dt converted to
// minutes and is clamped per axis; the returned correction is
// (K_p e + K_I acc) / 60, the per-minute law scaled to one second.
PiOutput pi_step(const ServoState &state, const Vec2 &desired_v, const Vec2 &measured_v, const ServoGains &gains,
                 double dt_s, double now_s = 0.0);

// Marks plan execution so that ablation can be refused while scanning.
class Interlock {
public:
  bool scanning() const { return scanning_.load(); }

  class ScanGuard {
  public:
    explicit ScanGuard(Interlock *lock);
    ~ScanGuard();
    ScanGuard(const ScanGuard &) = delete;
    ScanGuard &operator=(const ScanGuard &) = delete;

  private:
    Interlock *lock_;
  };

private:
  std::atomic<bool> scanning_{false};
};

// What the controller gets back from the instrument after one tick. There is
// deliberately no access to the scene or the true tip pose.
struct Observation {
  Image pixels;
  double t_s = 0.0;
  bool saturated = false;
  bool out_of_field = false;
};

class Plant {
public:
  virtual ~Plant() = default;
  virtual double frame_rate_hz() const = 0;
  // Applies the drive command, advances the world to t_s and captures a frame.
  virtual Observation step(const MotorCommand &cmd, double t_s) = 0;
  virtual Interlock *interlock() { return nullptr; }
};

enum class ServoMode { Open, Closed };

std::string to_string(ServoMode m);
ServoMode servo_mode_from_string(const std::string &s);

struct ServoConfig {
  ServoMode mode = ServoMode::Closed;
  ServoCalibration calibration;
  ServoGains gains;
  // Ticks between the frame a correction is computed from and the command it
  // first affects, beyond the unavoidable one.
  int latency_ticks = 0;
  int max_consecutive_failures = 10;
  ScannerGeometry geometry;
  Workspace workspace;
};

struct RunLogRow {
  double t_s = 0.0;
  Vec2 desired_v{};
  Vec2 measured_v{};
  Vec2 command_v{};
  std::vector<std::string> flags;
};

struct RunLog {
  std::vector<RunLogRow> rows;
  std::size_t registration_failures = 0;
  bool completed = false;

  // RMS and max of |measured - desired| over logged ticks, in um.
  double rms_tracking_error_um(double volts_to_tip_um_per_v) const;
  double max_tracking_error_um(double volts_to_tip_um_per_v) const;
};

void write_runlog_csv(std::ostream &out, const RunLog &log);

// Aborted run; carries the tick at which the loop gave up.
class ServoAbort : public Error {
public:
  ServoAbort(std::size_t frame, const std::string &what) : Error(what), frame_(frame) {}
  std::size_t frame() const { return frame_; }

private:
  std::size_t frame_;
};

// One plan execution. Each tick: command, world step and capture (plant),
// registration and integration (mosaicker), then in closed mode the PI update
// against the plan point nearest in time.
RunLog servo_scan(const ScanPlan &plan, Plant &plant, Mosaicker &mosaicker, const ServoConfig &cfg);

struct PhiCalibrationParams {
  // Short enough that the last frame is still within the search range of the first.
  double scan_length_mm = 0.06;
  double speed_mm_per_s = 0.06;
  double tolerance_deg = 0.1;
  int max_iterations = 6;
  RegistrationParams registration;
  double mosaic_um_per_px = 1.2;
};

struct PhiCalibrationResult {
  ServoCalibration calibration;
  int iterations = 0;
  // Measured track angle per iteration, degrees.
  std::vector<double> track_angles_deg;
};

// Direction of the least-squares line through a p_I track, oriented from the
// first to the last sample, in radians from the mosaic +x axis (y down).
double track_angle_rad(const std::vector<PositionEstimate> &track);

// Repeats short open-loop scans along the current estimate of the image x axis and
// folds the measured track angle into phi until it is below tolerance. Each
// iteration runs on a fresh plant.
PhiCalibrationResult calibrate_phi(const std::function<std::unique_ptr<Plant>()> &make_plant, const ServoConfig &cfg,
                                   const PhiCalibrationParams &params = {});

} // namespace endoscan
