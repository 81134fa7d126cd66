#pragma once

#include "endoscan/instrument.hpp"
#include "endoscan/mosaic.hpp"
#include "endoscan/scenario.hpp"
#include "endoscan/servo.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace endoscan {

// Deterministic outcome of one scan.
struct Metrics {
  std::string scenario;
  ServoMode mode = ServoMode::Closed;
  double rms_tracking_error_um = 0.0;
  double max_tracking_error_um = 0.0;
  double mosaic_diameter_mm = 0.0;
  // Max caliper of the planned tip path plus one field of view.
  double commanded_diameter_mm = 0.0;
  std::optional<GridMeasurement> grid;
  std::string grid_error;
  double coverage_area_mm2 = 0.0;
  std::size_t frames_processed = 0;
  std::size_t registration_failures = 0;
  double simulated_duration_s = 0.0;
  // Smallest field-of-view overlap between consecutive frames, from the p_I track.
  double min_frame_overlap = 0.0;
  double phi_deg = 0.0;
};

// Wall-clock figures; kept apart from Metrics so metrics.json is reproducible.
struct Timing {
  double wall_s = 0.0;
  double throughput_fps = 0.0;
};

nlohmann::json metrics_json(const Metrics &m);
nlohmann::json timing_json(const Timing &t);

ScanPlan build_plan(const ScenarioConfig &cfg);
ServoConfig servo_config(const ScenarioConfig &cfg, const ServoCalibration &cal);
std::unique_ptr<Mosaicker> build_mosaicker(const ScenarioConfig &cfg);

// Calibration taken from the config, or measured on a rigid copy of the scene.
ServoCalibration scenario_calibration(const ScenarioConfig &cfg);
PhiCalibrationResult run_phi_calibration(const ScenarioConfig &cfg);

double commanded_diameter_mm(const ScanPlan &plan, double fov_um);

// Area fraction shared by two discs of diameter fov at centre distance d.
double disc_overlap_fraction(double d, double fov);

struct ScanRun {
  Metrics metrics;
  Timing timing;
  RunLog log;
};

// Executes the scenario's plan and, when out_dir is set, writes mosaic.pgm,
// mosaic.json, runlog.csv, metrics.json and timing.json there.
ScanRun run_scan(const ScenarioConfig &cfg, const std::optional<std::filesystem::path> &out_dir = std::nullopt);

struct AblationReport {
  Metrics scan;
  Metrics rescan;
  TipPose centre_tip{};
  TipPose fire_tip{};
  int recentre_looks = 0;
  AblationMark mark;
  bool mark_found = false;
  Vec2 mosaic_centre_px{};
  Vec2 mark_centroid_px{};
  double centroid_offset_px = 0.0;
  double mark_diameter_um = 0.0;
};

nlohmann::json ablation_json(const AblationReport &r);

// Scan (scenario mode), retarget, fire, open-loop rescan, measure the mark.
AblationReport run_ablation(const ScenarioConfig &cfg,
                            const std::optional<std::filesystem::path> &out_dir = std::nullopt);

struct SweepMetrics {
  int grid_n = 0;
  double commanded_spacing_um = 0.0;
  double neighbour_mean_um = 0.0;
  double neighbour_iqr_um = 0.0;
  std::size_t pairs = 0;
};

nlohmann::json sweep_json(const SweepMetrics &m);
SweepMetrics workspace_sweep(const ScenarioConfig &cfg);

using FramePair = std::pair<Image, Image>;

// Pairs of probe frames of a random texture, the second displaced by up to
// max_shift_um in each axis.
std::vector<FramePair> generate_corpus(std::size_t pairs, int frame_px, std::uint64_t seed,
                                       double max_shift_um = 48.0);
void write_corpus(const std::filesystem::path &dir, const std::vector<FramePair> &pairs);
std::vector<FramePair> load_corpus(const std::filesystem::path &dir);

struct BenchResult {
  std::size_t pairs = 0;
  int frame_px = 0;
  double mean_ms = 0.0;
  double p99_ms = 0.0;
  double fps = 0.0;
};

nlohmann::json bench_json(const BenchResult &b);

// Per pair: resize both frames, extract the template, correlate. The latency
// of that sequence is what one new frame costs in the streaming loop.
BenchResult bench_registration(const std::vector<FramePair> &corpus, const RegistrationParams &params = {});

struct DragCalibration {
  double drag_coefficient = 0.0;
  double ratio = 0.0;
  double open_diameter_mm = 0.0;
  double closed_diameter_mm = 0.0;
  int iterations = 0;
};

// Open/closed mosaic diameters for the scenario at a given drag coefficient.
std::pair<double, double> drag_diameters_mm(ScenarioConfig cfg, double drag_coefficient);

// Bisection on the drag coefficient so that the open/closed diameter ratio hits target.
DragCalibration calibrate_drag(const ScenarioConfig &cfg, double target_ratio = 0.94 / 1.1, double tol = 0.005,
                               int max_iterations = 14);

} // namespace endoscan
