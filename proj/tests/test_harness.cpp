#include "endoscan/runner.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace endoscan;
using testsupport::for_all;
using testsupport::Gen;

namespace {

const std::filesystem::path kScenarios = ENDOSCAN_SCENARIO_DIR;

nlohmann::json minimal() { return {{"schema_version", 1}, {"name", "t"}, {"seed", 3}}; }

std::string slurp(const std::filesystem::path &p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Small raster over the grid: a few hundred frames.
ScenarioConfig small_scan() {
  ScenarioConfig c = load_scenario(kScenarios / "s0_grid_raster.json");
  c.plan.params.length_mm = 0.3;
  c.plan.rows = 2;
  return c;
}

} // namespace

TEST(Scenario, DefaultsParseFromMinimalDocument) {
  const ScenarioConfig c = parse_scenario(minimal());
  EXPECT_EQ(c.name, "t");
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.mode, ServoMode::Closed);
  EXPECT_DOUBLE_EQ(c.mosaic_um_per_px(), 1.2);
}

TEST(Scenario, ListsEveryProblem) {
  nlohmann::json j = minimal();
  j["mode"] = "sideways";
  j["colour"] = "red";
  j["plan"] = {{"speed_mm_per_s", -1.0}};
  try {
    parse_scenario(j);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError &e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("invalid scenario (3 problems)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("colour"), std::string::npos);
    EXPECT_NE(msg.find("mode"), std::string::npos);
    EXPECT_NE(msg.find("speed"), std::string::npos);
  }
}

TEST(Scenario, WrongTypeIsReported) {
  nlohmann::json j = minimal();
  j["seed"] = "seven";
  EXPECT_THROW(parse_scenario(j), ConfigError);
}

TEST(Scenario, SchemaVersionIsRequired) {
  nlohmann::json j = minimal();
  j.erase("schema_version");
  EXPECT_THROW(parse_scenario(j), ConfigError);
  j["schema_version"] = 2;
  EXPECT_THROW(parse_scenario(j), ConfigError);
}

TEST(Scenario, BundledScenariosLoad) {
  int n = 0;
  for (const auto &e : std::filesystem::directory_iterator(kScenarios)) {
    if (e.path().extension() == ".json") {
      EXPECT_NO_THROW(load_scenario(e.path())) << e.path();
      ++n;
    }
  }
  EXPECT_EQ(n, 8);
  EXPECT_DOUBLE_EQ(load_scenario(kScenarios / "s4_disturbance_1mm.json").disturbance.speed_mm_per_s, 1.0);
  EXPECT_DOUBLE_EQ(load_scenario(kScenarios / "s5_disturbance_1p25mm.json").disturbance.speed_mm_per_s, 1.25);
  EXPECT_EQ(load_scenario(kScenarios / "s2_grid_open.json").mode, ServoMode::Open);
}

TEST(Scenario, JsonRoundTrip) {
  for (const auto &e : std::filesystem::directory_iterator(kScenarios)) {
    const ScenarioConfig a = load_scenario(e.path());
    const nlohmann::json ja = scenario_to_json(a);
    EXPECT_EQ(scenario_to_json(parse_scenario(ja)), ja) << e.path();
  }
}

TEST(Scenario, RejectsBundledBadExample) {
  EXPECT_THROW(load_scenario(std::filesystem::path(ENDOSCAN_SCENARIO_DIR) / ".." / "tests" / "data" /
                             "bad_scenario.json"),
               ConfigError);
  EXPECT_THROW(load_scenario(kScenarios / "missing.json"), ConfigError);
}

TEST(Runner, SameConfigSameMetrics) {
  const ScenarioConfig c = small_scan();
  const ScanRun a = run_scan(c);
  const ScanRun b = run_scan(c);
  EXPECT_EQ(metrics_json(a.metrics).dump(), metrics_json(b.metrics).dump());
  EXPECT_EQ(a.log.rows.size(), b.log.rows.size());
  EXPECT_EQ(a.metrics.registration_failures, 0u);
  EXPECT_GT(a.metrics.frames_processed, 100u);
  EXPECT_FALSE(metrics_json(a.metrics).contains("wall_s"));
}

TEST(Runner, WritesOutputs) {
  const auto dir = std::filesystem::temp_directory_path() / "endoscan_run_outputs";
  std::filesystem::remove_all(dir);
  run_scan(small_scan(), dir);
  for (const char *f : {"mosaic.pgm", "mosaic.json", "runlog.csv", "metrics.json", "timing.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const auto m = nlohmann::json::parse(slurp(dir / "metrics.json"));
  EXPECT_TRUE(m.contains("mosaic_diameter_mm"));
}

TEST(Runner, CommandedDiameterIsCaliperPlusField) {
  ScanPlan p;
  for (const Vec2 v : {Vec2{0.0, 0.0}, Vec2{0.3, 0.0}, Vec2{0.0, 0.4}, Vec2{0.1, 0.1}}) {
    PlanPoint s;
    s.x_mm = v.x;
    s.y_mm = v.y;
    p.points.push_back(s);
  }
  EXPECT_NEAR(commanded_diameter_mm(p, 240.0), 0.5 + 0.24, 1e-12);
}

TEST(Runner, DiscOverlapFraction) {
  EXPECT_DOUBLE_EQ(disc_overlap_fraction(0.0, 240.0), 1.0);
  EXPECT_DOUBLE_EQ(disc_overlap_fraction(240.0, 240.0), 0.0);
  EXPECT_DOUBLE_EQ(disc_overlap_fraction(500.0, 240.0), 0.0);
  // Lens area against a Monte Carlo count on a fine lattice.
  for_all(5, 51, [](Gen &gen, int) {
    const double d = gen.real(10.0, 230.0);
    const double r = 120.0;
    long in_a = 0;
    long both = 0;
    for (double y = -r; y <= r; y += 0.5) {
      for (double x = -r; x <= r; x += 0.5) {
        if (x * x + y * y <= r * r) {
          ++in_a;
          if ((x - d) * (x - d) + y * y <= r * r) {
            ++both;
          }
        }
      }
    }
    ASSERT_NEAR(disc_overlap_fraction(d, 2.0 * r), static_cast<double>(both) / in_a, 3e-3) << d;
  });
}

TEST(Runner, NoiselessSweepMatchesCommandedSpacing) {
  ScenarioConfig c;
  c.sweep.actuation_noise_um = 0.0;
  const SweepMetrics m = workspace_sweep(c);
  EXPECT_NEAR(m.commanded_spacing_um, 3700.0 / 17.0, 1e-9);
  EXPECT_NEAR(m.neighbour_mean_um, m.commanded_spacing_um, 1e-6);
  EXPECT_NEAR(m.neighbour_iqr_um, 0.0, 1e-6);
  EXPECT_EQ(m.pairs, 2u * 18u * 17u);
}

TEST(Runner, NoisySweepIsDeterministic) {
  ScenarioConfig c;
  const SweepMetrics a = workspace_sweep(c);
  const SweepMetrics b = workspace_sweep(c);
  EXPECT_EQ(sweep_json(a).dump(), sweep_json(b).dump());
  EXPECT_GT(a.neighbour_mean_um, a.commanded_spacing_um);
}

TEST(Corpus, WriteAndLoadRoundTrip) {
  const auto pairs = generate_corpus(3, 128, 9);
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_EQ(pairs[0].first.width(), 128);
  const auto dir = std::filesystem::temp_directory_path() / "endoscan_corpus_rt";
  std::filesystem::remove_all(dir);
  write_corpus(dir, pairs);
  const auto back = load_corpus(dir);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < pairs[k].first.data().size(); ++i) {
      ASSERT_NEAR(back[k].first.data()[i], pairs[k].first.data()[i], 0.5 / 255.0 + 1e-6);
    }
  }
  EXPECT_THROW(load_corpus(dir / "nope"), Error);
}

TEST(Corpus, BenchReportsEveryPair) {
  const BenchResult b = bench_registration(generate_corpus(4, 256, 2));
  EXPECT_EQ(b.pairs, 4u);
  EXPECT_EQ(b.frame_px, 256);
  EXPECT_GT(b.fps, 0.0);
  EXPECT_GE(b.p99_ms, b.mean_ms * 0.5);
}

// Defaults that restate published figures, checked against the reference text.
TEST(ReferenceConstants, DefaultsMatchTheText) {
  if (!std::filesystem::exists(ENDOSCAN_REFERENCE_TEXT)) {
    GTEST_SKIP() << "reference text not present";
  }
  const std::string text = slurp(ENDOSCAN_REFERENCE_TEXT);
  ASSERT_FALSE(text.empty());
  auto has = [&](const std::string &s) { return text.find(s) != std::string::npos; };

  const ScannerGeometry g;
  EXPECT_TRUE(has("$664$") && g.volts_to_tip_um_per_v == 664.0);
  EXPECT_TRUE(has("\\SI{58}{\\milli\\metre}") && g.shaft_length_mm == 58.0);
  EXPECT_TRUE(has("\\diameter{\\SI{3.3}{\\milli\\metre}}") && g.outer_diameter_mm == 3.3);
  EXPECT_TRUE(has("\\diameter{\\SI{2.7}{\\milli\\metre}}") && g.inner_diameter_mm == 2.7);
  EXPECT_TRUE(has("\\num{3.7 x 3.7}") && 2.0 * Workspace{}.half_width_mm == 3.7);

  const ProbeSpec p;
  EXPECT_TRUE(has("\\SI{120}{\\framespersecond}") && p.frame_rate_hz == 120.0);
  EXPECT_TRUE(has("\\SI{30000}{cores}") && p.core_count == 30000);
  EXPECT_TRUE(has("core spacing  \\SI{3}{\\micro\\metre}") && p.core_spacing_um == 3.0);

  const AblationConfig a;
  EXPECT_TRUE(has("\\SI{104}{\\micro\\metre} diameter") && a.mark_diameter_um == 104.0);
  EXPECT_TRUE(has("\\SI{<50}{\\micro\\metre}") && a.thermal_spread_um == 50.0);

  // Figures the acceptance checks compare against.
  EXPECT_TRUE(has("\\SI{214}{\\micro\\metre}"));
  EXPECT_TRUE(has("{69\\pm3}"));
  EXPECT_TRUE(has("{235\\pm10}"));
  EXPECT_TRUE(has("\\SI{1.1}{\\milli\\metre}"));
  EXPECT_TRUE(has("\\SI{0.94}{\\milli\\metre}"));
  EXPECT_TRUE(has("{1.25}{\\milli\\metre\\per\\second}"));
}
