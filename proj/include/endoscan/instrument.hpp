#pragma once

#include "endoscan/ablation.hpp"
#include "endoscan/endoscope.hpp"
#include "endoscan/phantom.hpp"
#include "endoscan/scenario.hpp"
#include "endoscan/servo.hpp"

#include <optional>

namespace endoscan {

// The simulated scanner, tissue and probe behind the Plant interface. The
// harness may read ground truth through the accessors; the servo only sees
// Observations.
class SimulatedInstrument : public Plant {
public:
  SimulatedInstrument(Scene scene, ScannerGeometry geometry, Workspace workspace, ProbeSpec probe,
                      PreprocessParams pre, DisturbanceModel disturbance, DeformationModel deformation);

  double frame_rate_hz() const override { return endoscope_.spec().frame_rate_hz; }
  // The first call only captures; later calls advance the world by one frame period.
  Observation step(const MotorCommand &cmd, double t_s) override;
  Interlock *interlock() override { return &interlock_; }

  // Quasi-static repositioning between scans: no world time passes.
  void move_to(const TipPose &tip);
  // Fires the ablation fibre at its current world position.
  AblationMark fire(const AblationConfig &cfg);

  const Scene &scene() const { return scene_; }
  Scene &scene() { return scene_; }
  TipPose tip() const { return tip_; }
  const Endoscope &endoscope() const { return endoscope_; }

private:
  Scene scene_;
  ScannerGeometry geometry_;
  Workspace workspace_;
  Endoscope endoscope_;
  DisturbanceModel disturbance_;
  DeformationModel deformation_;
  Interlock interlock_;
  TipPose tip_{};
  bool started_ = false;
};

Scene build_scene(const ScenarioConfig &cfg);

// Instrument for a scenario. The rigid flag drops disturbance and deformation.
std::unique_ptr<SimulatedInstrument> build_instrument(const ScenarioConfig &cfg, bool rigid = false);
std::unique_ptr<SimulatedInstrument> build_instrument(const ScenarioConfig &cfg, Scene scene, bool rigid = false);

} // namespace endoscan
