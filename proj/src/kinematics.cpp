#include "endoscan/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace endoscan {

void ScannerGeometry::validate() const {
  std::ostringstream err;
  if (!(inner_diameter_mm >= 0.0 && inner_diameter_mm < outer_diameter_mm)) {
    err << "inner diameter must satisfy 0 <= ID < OD; ";
  }
  if (!(cam_position_mm > 0.0 && cam_position_mm < shaft_length_mm)) {
    err << "cam position must satisfy 0 < a < shaft length; ";
  }
  if (!(elastic_modulus_gpa > 0.0)) {
    err << "elastic modulus must be positive; ";
  }
  if (!(volts_to_tip_um_per_v > 0.0)) {
    err << "volts-to-tip scale must be positive; ";
  }
  if (!(drive_limit_v > 0.0)) {
    err << "drive limit must be positive; ";
  }
  if (!err.str().empty()) {
    throw GeometryError(err.str());
  }
}

bool Workspace::contains(const TipPose &p, double tol_mm) const {
  return std::abs(p.x_mm - centre.x_mm) <= half_width_mm + tol_mm &&
         std::abs(p.y_mm - centre.y_mm) <= half_width_mm + tol_mm;
}

TipPose Workspace::clamp(const TipPose &p) const {
  return {std::clamp(p.x_mm, centre.x_mm - half_width_mm, centre.x_mm + half_width_mm),
          std::clamp(p.y_mm, centre.y_mm - half_width_mm, centre.y_mm + half_width_mm)};
}

MotorAngles volts_to_angles(const MotorCommand &cmd, const ScannerGeometry &geom) {
  const double limit = geom.drive_limit_v;
  if (!(std::abs(cmd.v1) <= limit)) {
    throw RangeError(1, "axis 1 voltage " + std::to_string(cmd.v1) + " V outside drive range");
  }
  if (!(std::abs(cmd.v2) <= limit)) {
    throw RangeError(2, "axis 2 voltage " + std::to_string(cmd.v2) + " V outside drive range");
  }
  return {cmd.v1 * geom.volts_to_degrees, cmd.v2 * geom.volts_to_degrees};
}

double second_moment_of_area(const ScannerGeometry &geom) {
  const double od = geom.outer_diameter_mm;
  const double id = geom.inner_diameter_mm;
  if (!(id >= 0.0 && id < od)) {
    throw GeometryError("second moment of area needs 0 <= ID < OD");
  }
  return kPi / 64.0 * (od * od * od * od - id * id * id * id);
}

double beam_amplification(const ScannerGeometry &geom) {
  const double a = geom.cam_position_mm;
  return (3.0 * geom.shaft_length_mm - a) / (2.0 * a);
}

TipPose cam_to_tip(const CamPoint &p, const ScannerGeometry &geom) {
  const double r_p = std::hypot(p.x_mm, p.y_mm);
  if (r_p == 0.0) {
    return {};
  }
  const double theta_p = std::atan2(p.x_mm, p.y_mm);
  const double a = geom.cam_position_mm;
  // GPa -> N/mm^2
  const double e = geom.elastic_modulus_gpa * 1e3;
  const double i = second_moment_of_area(geom);
  const double stiffness = 6.0 * e * i;

  const double load = stiffness * r_p / (2.0 * a * a * a);
  const double delta = load * a * a / stiffness * (3.0 * geom.shaft_length_mm - a);

  const double closed_form = r_p * beam_amplification(geom);
  if (std::abs(delta - closed_form) > 1e-12 * std::abs(closed_form)) {
    throw std::logic_error("beam deflection disagrees with its closed form");
  }
  return {delta * std::sin(theta_p), delta * std::cos(theta_p)};
}

double default_cam_gain_mm_per_deg(const ScannerGeometry &geom) {
  return geom.volts_to_tip_um_per_v * 1e-3 / (geom.volts_to_degrees * beam_amplification(geom));
}

CamPoint angles_to_cam(const MotorAngles &angles, double cam_gain_mm_per_deg) {
  return {angles.theta1_deg * cam_gain_mm_per_deg, angles.theta2_deg * cam_gain_mm_per_deg};
}

TipPose beam_chain_tip(const MotorCommand &cmd, const ScannerGeometry &geom) {
  const MotorAngles angles = volts_to_angles(cmd, geom);
  return cam_to_tip(angles_to_cam(angles, default_cam_gain_mm_per_deg(geom)), geom);
}

Saturable<TipPose> volts_to_tip(const MotorCommand &cmd, const ScannerGeometry &geom, const Workspace &ws) {
  const double mm_per_v = geom.volts_to_tip_um_per_v * 1e-3;
  const TipPose raw{ws.centre.x_mm + mm_per_v * cmd.v1, ws.centre.y_mm + mm_per_v * cmd.v2};
  if (ws.contains(raw)) {
    return {raw, false};
  }
  return {ws.clamp(raw), true};
}

Saturable<MotorCommand> tip_to_volts(const TipPose &target, const ScannerGeometry &geom, const Workspace &ws) {
  const bool inside = ws.contains(target);
  const TipPose t = inside ? target : ws.clamp(target);
  const double mm_per_v = geom.volts_to_tip_um_per_v * 1e-3;
  return {{(t.x_mm - ws.centre.x_mm) / mm_per_v, (t.y_mm - ws.centre.y_mm) / mm_per_v}, !inside};
}

} // namespace endoscan
