#pragma once

#include "endoscan/ablation.hpp"
#include "endoscan/endoscope.hpp"
#include "endoscan/kinematics.hpp"
#include "endoscan/mosaic.hpp"
#include "endoscan/phantom.hpp"
#include "endoscan/servo.hpp"
#include "endoscan/trajectory.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace endoscan {

inline constexpr int kScenarioSchemaVersion = 1;

enum class PlanKind { Linear, Raster, Spiral };
enum class PhantomKind { Grid, Texture, Uniform };

struct PlanConfig {
  PlanKind kind = PlanKind::Spiral;
  ScanParams params;
  int rows = 4;
  double row_spacing_mm = 0.2;
};

struct PhantomConfig {
  PhantomKind kind = PhantomKind::Texture;
  double extent_mm = 3.0;
  double resolution_um_per_px = 1.0;
  GridSpec grid;
  double feature_scale_um = 20.0;
  double intensity = 1.0;
};

struct DisturbanceConfig {
  double amplitude_um = 100.0;
  double speed_mm_per_s = 0.0;
};

struct DeformationConfig {
  double drag_coefficient = 0.0;
  double recovery_time_s = 2.0;
};

enum class CalibrationSource { Config, Run };

struct ServoSection {
  ServoGains gains;
  int latency_ticks = 0;
  int max_consecutive_failures = 10;
  CalibrationSource calibration = CalibrationSource::Config;
  // Used when calibration is taken from the config.
  double phi_deg = 0.0;
};

struct MosaicConfig {
  RegistrationParams registration;
  int canvas_px = 4096;
  bool auto_grow = true;
};

struct SweepConfig {
  int grid_n = 18;
  // Per-axis standard deviation of the simulated tip placement error.
  double actuation_noise_um = 12.0;
};

// Everything a run depends on. Same config and seed give the same outputs.
struct ScenarioConfig {
  std::string name = "unnamed";
  std::uint64_t seed = 1;
  ServoMode mode = ServoMode::Closed;
  ScannerGeometry scanner;
  Workspace workspace;
  ProbeSpec probe;
  double gaussian_sigma_px = 1.4;
  PlanConfig plan;
  PhantomConfig phantom;
  DisturbanceConfig disturbance;
  DeformationConfig deformation;
  ServoSection servo;
  MosaicConfig mosaic;
  AblationConfig ablation;
  SweepConfig sweep;

  // Mosaic pixel size: field of view over the working diameter.
  double mosaic_um_per_px() const { return probe.fov_diameter_um / mosaic.registration.working_diameter_px; }
};

// Throws ConfigError listing every problem found (unknown keys, wrong types,
// out-of-range values).
ScenarioConfig parse_scenario(const nlohmann::json &j);
ScenarioConfig load_scenario(const std::filesystem::path &path);
nlohmann::json scenario_to_json(const ScenarioConfig &cfg);

} // namespace endoscan
