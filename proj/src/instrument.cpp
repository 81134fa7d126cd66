#include "endoscan/instrument.hpp"

namespace endoscan {

SimulatedInstrument::SimulatedInstrument(Scene scene, ScannerGeometry geometry, Workspace workspace, ProbeSpec probe,
                                         PreprocessParams pre, DisturbanceModel disturbance,
                                         DeformationModel deformation)
    : scene_(std::move(scene)), geometry_(geometry), workspace_(workspace), endoscope_(probe, std::move(pre)),
      disturbance_(disturbance), deformation_(deformation), tip_(workspace.centre) {
  geometry_.validate();
}

Observation SimulatedInstrument::step(const MotorCommand &cmd, double t_s) {
  const Saturable<TipPose> tip = volts_to_tip(cmd, geometry_, workspace_);
  if (started_) {
    const double dt = 1.0 / frame_rate_hz();
    const Vec2 velocity = (tip.value.as_vec() - tip_.as_vec()) * (1.0 / dt);
    scene_.rigid_offset_um = disturbance_.step(dt);
    scene_.deformation_um = deformation_.step(velocity, dt);
  }
  started_ = true;
  tip_ = tip.value;
  Frame frame = endoscope_.capture(scene_, tip_, t_s);
  Observation obs;
  obs.pixels = std::move(frame.pixels);
  obs.t_s = t_s;
  obs.saturated = tip.saturated;
  obs.out_of_field = frame.out_of_field;
  return obs;
}

void SimulatedInstrument::move_to(const TipPose &tip) {
  if (interlock_.scanning()) {
    throw InterlockError("cannot reposition while a scan plan is executing");
  }
  tip_ = workspace_.clamp(tip);
}

AblationMark SimulatedInstrument::fire(const AblationConfig &cfg) {
  return endoscan::fire(scene_, fibre_axis_um(tip_, cfg), cfg, interlock_);
}

Scene build_scene(const ScenarioConfig &cfg) {
  const auto &p = cfg.phantom;
  switch (p.kind) {
  case PhantomKind::Grid:
    return make_grid(p.grid, p.extent_mm, cfg.seed, p.resolution_um_per_px);
  case PhantomKind::Texture:
    return make_texture(cfg.seed, p.extent_mm, p.feature_scale_um, p.resolution_um_per_px);
  case PhantomKind::Uniform:
    break;
  }
  return make_uniform(p.intensity, p.extent_mm, p.resolution_um_per_px);
}

std::unique_ptr<SimulatedInstrument> build_instrument(const ScenarioConfig &cfg, Scene scene, bool rigid) {
  ProbeSpec probe = cfg.probe;
  probe.noise_seed = cfg.seed ^ 0x5DEECE66DULL;
  PreprocessParams pre;
  pre.gaussian_sigma_px = cfg.gaussian_sigma_px;
  DisturbanceModel dist(cfg.disturbance.amplitude_um, rigid ? 0.0 : cfg.disturbance.speed_mm_per_s,
                        cfg.seed * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL);
  DeformationModel def(rigid ? 0.0 : cfg.deformation.drag_coefficient, cfg.deformation.recovery_time_s);
  return std::make_unique<SimulatedInstrument>(std::move(scene), cfg.scanner, cfg.workspace, probe, std::move(pre),
                                               dist, def);
}

std::unique_ptr<SimulatedInstrument> build_instrument(const ScenarioConfig &cfg, bool rigid) {
  return build_instrument(cfg, build_scene(cfg), rigid);
}

} // namespace endoscan
