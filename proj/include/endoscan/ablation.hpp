#pragma once

#include "endoscan/kinematics.hpp"
#include "endoscan/phantom.hpp"
#include "endoscan/servo.hpp"

namespace endoscan {

struct AblationConfig {
  // Ablation-fibre axis relative to the imaging-probe axis, world axes.
  Vec2 lateral_offset_um{500.0, 0.0};
  double power_w = 3.0;
  double duration_ms = 40.0;
  // Pulse settings are recorded but do not scale the mark.
  double mark_diameter_um = 104.0;
  double thermal_spread_um = 50.0;

  void validate() const;
};

// Tip pose that puts the ablation fibre over the point currently under the
// imaging axis: current - offset. Throws WorkspaceError if that pose is outside.
TipPose target_centre(const TipPose &current, const AblationConfig &cfg, const Workspace &ws);

// World point under the ablation fibre for a given tip pose.
Vec2 fibre_axis_um(const TipPose &tip, const AblationConfig &cfg);

// Marks the tissue under world_um. Refused while a plan is executing.
AblationMark fire(Scene &scene, const Vec2 &world_um, const AblationConfig &cfg, const Interlock &interlock);

} // namespace endoscan
