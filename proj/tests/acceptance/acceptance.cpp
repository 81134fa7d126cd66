// Acceptance suite: one PASS/FAIL line per criterion.
//
// Exit status is 0 when every criterion ran to completion, whatever its
// verdict, so that ctest tracks crashes and exceptions. Pass --strict to exit
// with the number of failed criteria instead.

#include "endoscan/kinematics.hpp"
#include "endoscan/mosaic.hpp"
#include "endoscan/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

using namespace endoscan;

namespace {

const std::filesystem::path kScenarios = ENDOSCAN_SCENARIO_DIR;

// Pinned tolerances.
constexpr double kChainRelTol = 1e-12;
constexpr double kInertia = 3.2127;
constexpr double kInertiaTol = 1e-4;
constexpr double kRoundTripTol = 1e-9;
constexpr int kMaxShift = 40;
constexpr int kRegFrames = 50;
constexpr double kRegExactFraction = 0.99;
constexpr double kThickness = 73.0, kThicknessBand = 4.0;
constexpr double kWidth = 237.0, kWidthBand = 12.0;
constexpr double kDragRatio = 0.855, kDragRatioTol = 0.03;
constexpr double kCommandedTol = 0.05;
constexpr double kClosedRms = 20.0;
constexpr double kOpenRms = 100.0;
constexpr double kCentroidPx = 1.0;
constexpr double kMarkDiameter = 104.0, kMarkTol = 10.0;
constexpr double kMinFps = 120.0;
constexpr double kMaxP99Ms = 8.33;
constexpr std::size_t kBenchPairs = 1000;
constexpr double kMinArea = 3.0;
constexpr double kMaxSimSeconds = 10.0;
constexpr double kMinOverlap = 0.5;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;
int crashes = 0;

void criterion(int id, const char *name, double limit_s, const std::function<Verdict()> &body) {
  const auto t0 = Clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception &e) {
    v = {false, std::string("exception: ") + e.what()};
    ++crashes;
  }
  const double wall = since(t0);
  const bool in_time = wall < limit_s;
  const bool pass = v.pass && in_time;
  if (!pass) {
    ++failures;
  }
  std::printf("%s %d %s: %s; runtime %.2f s (limit %.0f s%s)\n", pass ? "PASS" : "FAIL", id, name, v.detail.c_str(),
              wall, limit_s, in_time ? "" : ", exceeded");
  std::fflush(stdout);
}

std::string fmt(const char *f, double a = 0, double b = 0, double c = 0, double d = 0, double e = 0) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a, b, c, d, e);
  return buf;
}

Verdict kinematics() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const ScannerGeometry g;
  const double amp = (3.0 * g.shaft_length_mm - g.cam_position_mm) / (2.0 * g.cam_position_mm);
  double worst_chain = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const CamPoint p{0.7 * u(rng), 0.7 * u(rng)};
    const double r_p = std::hypot(p.x_mm, p.y_mm);
    const TipPose t = cam_to_tip(p, g);
    const double delta = std::hypot(t.x_mm, t.y_mm);
    const double closed = r_p * amp;
    if (closed > 0.0) {
      worst_chain = std::max(worst_chain, std::abs(delta - closed) / closed);
    }
  }
  const double inertia_oracle = 3.14159265358979323846 / 64.0 * (std::pow(3.3, 4) - std::pow(2.7, 4));
  const double inertia = second_moment_of_area(g);
  Workspace ws;
  double worst_rt = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const TipPose p{1.85 * u(rng), 1.85 * u(rng)};
    const TipPose back = volts_to_tip(tip_to_volts(p, g, ws).value, g, ws).value;
    worst_rt = std::max(worst_rt, std::hypot(back.x_mm - p.x_mm, back.y_mm - p.y_mm));
  }
  const bool ok = worst_chain <= kChainRelTol && std::abs(inertia - kInertia) <= kInertiaTol &&
                  std::abs(inertia - inertia_oracle) <= 1e-12 && worst_rt < kRoundTripTol;
  return {ok, fmt("chain rel err %.2e (<= %.0e), I = %.5f mm^4 (%.4f +/- %.0e)", worst_chain, kChainRelTol, inertia,
                  kInertia, kInertiaTol) +
                  fmt(", roundtrip %.2e mm (< %.0e)", worst_rt, kRoundTripTol)};
}

Image crop(const Image &field, int x0, int y0, int d) {
  Image out(d, d);
  for (int y = 0; y < d; ++y) {
    for (int x = 0; x < d; ++x) {
      const double dx = x + 0.5 - 0.5 * d;
      const double dy = y + 0.5 - 0.5 * d;
      out.at(x, y) = dx * dx + dy * dy <= 0.25 * d * d ? field.at(x0 + x, y0 + y) : 0.0f;
    }
  }
  return out;
}

Verdict registration() {
  const RegistrationParams params;
  const int d = params.working_diameter_px;
  const int margin = kMaxShift + 2;
  const int field_px = d + 2 * margin;
  std::size_t total = 0;
  std::size_t exact = 0;
  std::size_t within_one = 0;
  for (int f = 0; f < kRegFrames; ++f) {
    const Image field = make_texture(1000 + f, field_px * 1.2e-3, 20.0, 1.2).field();
    NccRegistrar reg(params);
    reg.set_reference(crop(field, margin, margin, d));
    for (int dy = -kMaxShift; dy <= kMaxShift; ++dy) {
      for (int dx = -kMaxShift; dx <= kMaxShift; ++dx) {
        ++total;
        try {
          const Shift s = reg.match(crop(field, margin + dx, margin + dy, d)).shift;
          const int ex = std::abs(s.dx - dx);
          const int ey = std::abs(s.dy - dy);
          exact += ex == 0 && ey == 0;
          within_one += ex <= 1 && ey <= 1;
        } catch (const RegistrationError &) {
        }
      }
    }
  }
  const double fe = static_cast<double>(exact) / total;
  const bool ok = within_one == total && fe >= kRegExactFraction;
  return {ok, fmt("%.0f shifts, exact %.4f (>= %.2f), within 1 px %.4f (= 1)", static_cast<double>(total), fe,
                  kRegExactFraction, static_cast<double>(within_one) / total)};
}

Verdict grid() {
  const ScenarioConfig cfg = load_scenario(kScenarios / "s1_grid_closed.json");
  const ScanRun run = run_scan(cfg);
  if (!run.metrics.grid) {
    return {false, "grid measurement failed: " + run.metrics.grid_error};
  }
  const auto &g = *run.metrics.grid;
  const bool ok =
      std::abs(g.thickness_mean_um - kThickness) <= kThicknessBand && std::abs(g.width_mean_um - kWidth) <= kWidthBand;
  return {ok, fmt("line %.1f um (%.0f +/- %.0f), square %.1f um", g.thickness_mean_um, kThickness, kThicknessBand,
                  g.width_mean_um) +
                  fmt(" (%.0f +/- %.0f)", kWidth, kWidthBand)};
}

Verdict deformation() {
  const ScenarioConfig cfg = load_scenario(kScenarios / "s3_deformation.json");
  const auto [open_mm, closed_mm] = drag_diameters_mm(cfg, cfg.deformation.drag_coefficient);
  const double commanded = commanded_diameter_mm(build_plan(cfg), cfg.probe.fov_diameter_um);
  const double ratio = open_mm / closed_mm;
  const double rel = std::abs(closed_mm - commanded) / commanded;
  const bool ok = std::abs(ratio - kDragRatio) <= kDragRatioTol && rel <= kCommandedTol;
  return {ok, fmt("open %.4f mm / closed %.4f mm = %.4f (%.3f +/- %.2f)", open_mm, closed_mm, ratio, kDragRatio,
                  kDragRatioTol) +
                  fmt(", closed vs commanded %.4f mm: %.2f%% (<= %.0f%%)", commanded, 100.0 * rel,
                      100.0 * kCommandedTol)};
}

Verdict disturbance() {
  ScenarioConfig s4 = load_scenario(kScenarios / "s4_disturbance_1mm.json");
  const ScenarioConfig s5 = load_scenario(kScenarios / "s5_disturbance_1p25mm.json");
  s4.mode = ServoMode::Closed;
  const double c4 = run_scan(s4).metrics.rms_tracking_error_um;
  const double c5 = run_scan(s5).metrics.rms_tracking_error_um;
  s4.mode = ServoMode::Open;
  const double o4 = run_scan(s4).metrics.rms_tracking_error_um;
  const bool ok = c4 < kClosedRms && c5 < kClosedRms && o4 > kOpenRms;
  return {ok, fmt("closed RMS %.1f um at 1.0 mm/s, %.1f um at 1.25 mm/s (< %.0f); open RMS %.1f um at 1.0 mm/s (> %.0f)",
                  c4, c5, kClosedRms, o4, kOpenRms)};
}

Verdict ablation() {
  const AblationReport r = run_ablation(load_scenario(kScenarios / "s6_ablation.json"));
  if (!r.mark_found) {
    return {false, "no mark found in the rescan mosaic"};
  }
  const bool ok = r.centroid_offset_px <= kCentroidPx && std::abs(r.mark_diameter_um - kMarkDiameter) <= kMarkTol;
  return {ok, fmt("centroid offset %.2f px (<= %.0f), mark diameter %.1f um (%.0f +/- %.0f)", r.centroid_offset_px,
                  kCentroidPx, r.mark_diameter_um, kMarkDiameter, kMarkTol)};
}

Verdict throughput() {
  const BenchResult b = bench_registration(generate_corpus(kBenchPairs, 256, 7));
  const bool ok = b.fps >= kMinFps && b.p99_ms < kMaxP99Ms;
  return {ok, fmt("%.0f pairs, %.0f fps (>= %.0f), p99 %.3f ms (< %.2f)", static_cast<double>(b.pairs), b.fps, kMinFps,
                  b.p99_ms, kMaxP99Ms)};
}

Verdict coverage() {
  const ScenarioConfig cfg = load_scenario(kScenarios / "s7_coverage.json");
  const Metrics m = run_scan(cfg).metrics;
  const bool ok = m.coverage_area_mm2 >= kMinArea && m.simulated_duration_s <= kMaxSimSeconds &&
                  m.min_frame_overlap >= kMinOverlap && cfg.probe.frame_rate_hz == 120.0;
  return {ok, fmt("area %.2f mm^2 (>= %.0f), simulated %.2f s (<= %.0f), min overlap %.3f", m.coverage_area_mm2,
                  kMinArea, m.simulated_duration_s, kMaxSimSeconds, m.min_frame_overlap) +
                  fmt(" (>= %.1f)", kMinOverlap)};
}

} // namespace

int main(int argc, char **argv) {
  const bool strict = argc > 1 && std::strcmp(argv[1], "--strict") == 0;
  criterion(1, "kinematics and beam theory", 1.0, kinematics);
  criterion(2, "registration oracle", 30.0, registration);
  criterion(3, "grid phantom reproduction", 60.0, grid);
  criterion(4, "deformation compensation", 60.0, deformation);
  // Three scans, each with its own 60 s budget.
  criterion(5, "disturbance rejection", 180.0, disturbance);
  criterion(6, "ablation targeting", 60.0, ablation);
  criterion(7, "registration throughput", 120.0, throughput);
  criterion(8, "scale and coverage", 60.0, coverage);
  std::printf("%d of 8 criteria failed\n", failures);
  if (strict) {
    return failures;
  }
  return crashes == 0 ? 0 : 1;
}
