#include "endoscan/ablation.hpp"

#include <cmath>
#include <sstream>

namespace endoscan {

void AblationConfig::validate() const {
  std::ostringstream err;
  if (!(mark_diameter_um > 0.0)) {
    err << "mark diameter must be positive; ";
  }
  if (!(thermal_spread_um >= 0.0)) {
    err << "thermal spread must be non-negative; ";
  }
  if (!(power_w > 0.0) || !(duration_ms > 0.0)) {
    err << "pulse power and duration must be positive; ";
  }
  if (!std::isfinite(lateral_offset_um.x) || !std::isfinite(lateral_offset_um.y)) {
    err << "lateral offset must be finite; ";
  }
  if (!err.str().empty()) {
    throw ConfigError(err.str());
  }
}

TipPose target_centre(const TipPose &current, const AblationConfig &cfg, const Workspace &ws) {
  cfg.validate();
  const TipPose target{current.x_mm - cfg.lateral_offset_um.x * 1e-3, current.y_mm - cfg.lateral_offset_um.y * 1e-3};
  if (!ws.contains(target, 1e-9)) {
    std::ostringstream msg;
    msg << "retargeted pose (" << target.x_mm << ", " << target.y_mm << ") mm is outside the workspace";
    throw WorkspaceError(msg.str());
  }
  return target;
}

Vec2 fibre_axis_um(const TipPose &tip, const AblationConfig &cfg) {
  return Vec2{tip.x_mm * 1000.0, tip.y_mm * 1000.0} + cfg.lateral_offset_um;
}

AblationMark fire(Scene &scene, const Vec2 &world_um, const AblationConfig &cfg, const Interlock &interlock) {
  cfg.validate();
  if (interlock.scanning()) {
    throw InterlockError("ablation refused: a scan plan is executing");
  }
  AblationMark mark{scene.to_tissue(world_um), cfg.mark_diameter_um, cfg.thermal_spread_um};
  scene.apply_mark(mark);
  return mark;
}

} // namespace endoscan
