#pragma once

#include "endoscan/common.hpp"

namespace endoscan {

// Physical constants of the cantilevered scanning tube and its drive chain.
struct ScannerGeometry {
  double shaft_length_mm = 58.0;
  double outer_diameter_mm = 3.3;
  double inner_diameter_mm = 2.7;
  double elastic_modulus_gpa = 209.0;
  // Distance from the fixation point to the cam contact.
  double cam_position_mm = 29.0;
  double volts_to_degrees = 2.3438;
  double volts_to_tip_um_per_v = 664.0;
  // Accepted |v| on either drive axis.
  double drive_limit_v = 20.0;

  void validate() const;
};

struct MotorCommand {
  double v1 = 0.0;
  double v2 = 0.0;
  friend constexpr bool operator==(const MotorCommand &, const MotorCommand &) = default;
};

struct MotorAngles {
  double theta1_deg = 0.0;
  double theta2_deg = 0.0;
};

// Shaft-centre deflection at the cam plane, relative to the unloaded origin.
struct CamPoint {
  double x_mm = 0.0;
  double y_mm = 0.0;
};

struct TipPose {
  double x_mm = 0.0;
  double y_mm = 0.0;

  Vec2 as_vec() const { return {x_mm, y_mm}; }
  static TipPose from_vec(const Vec2 &v) { return {v.x, v.y}; }
  friend constexpr bool operator==(const TipPose &, const TipPose &) = default;
};

// Square linear region of the tip workspace.
struct Workspace {
  double half_width_mm = 1.85;
  TipPose centre{};

  double area_mm2() const { return 4.0 * half_width_mm * half_width_mm; }
  bool contains(const TipPose &p, double tol_mm = 1e-12) const;
  TipPose clamp(const TipPose &p) const;
};

template <typename T> struct Saturable {
  T value{};
  bool saturated = false;
};

// theta_i = v_i * R. Throws RangeError naming the axis when |v_i| exceeds the drive limit.
MotorAngles volts_to_angles(const MotorCommand &cmd, const ScannerGeometry &geom);

// I = pi/64 (OD^4 - ID^4), in mm^4.
double second_moment_of_area(const ScannerGeometry &geom);

// Tip deflection per unit cam deflection: (3 S_l - a) / (2 a).
double beam_amplification(const ScannerGeometry &geom);

// Beam-theory map from cam-plane deflection to tip position. The polar angle is
// measured from +y, so x_t = delta sin(theta_p), y_t = delta cos(theta_p).
TipPose cam_to_tip(const CamPoint &p, const ScannerGeometry &geom);

// Surrogate for the cam-lever geometry: a linear map from motor angles to cam
// deflection. The default gain makes the beam chain agree with the calibrated
// end-to-end volts-to-tip scale.
double default_cam_gain_mm_per_deg(const ScannerGeometry &geom);
CamPoint angles_to_cam(const MotorAngles &angles, double cam_gain_mm_per_deg);

// volts -> angles -> cam -> tip through the beam model.
TipPose beam_chain_tip(const MotorCommand &cmd, const ScannerGeometry &geom);

// Calibrated affine map used for control. Positions outside the workspace are clamped.
Saturable<TipPose> volts_to_tip(const MotorCommand &cmd, const ScannerGeometry &geom, const Workspace &ws);
Saturable<MotorCommand> tip_to_volts(const TipPose &target, const ScannerGeometry &geom, const Workspace &ws);

} // namespace endoscan
