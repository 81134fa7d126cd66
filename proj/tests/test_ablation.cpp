#include "endoscan/ablation.hpp"
#include "endoscan/instrument.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace endoscan;

TEST(Ablation, TargetCentreSubtractsTheOffset) {
  const AblationConfig cfg;
  const Workspace ws;
  const TipPose t = target_centre({0.0, 0.0}, cfg, ws);
  EXPECT_DOUBLE_EQ(t.x_mm, -0.5);
  EXPECT_DOUBLE_EQ(t.y_mm, 0.0);

  AblationConfig none;
  none.lateral_offset_um = {};
  const TipPose same = target_centre({0.3, -0.7}, none, ws);
  EXPECT_DOUBLE_EQ(same.x_mm, 0.3);
  EXPECT_DOUBLE_EQ(same.y_mm, -0.7);
}

TEST(Ablation, TargetOutsideWorkspaceIsRefused) {
  const AblationConfig cfg;
  const Workspace ws;
  EXPECT_THROW(target_centre({-1.5, 0.0}, cfg, ws), WorkspaceError);
  // Retargeting twice applies the offset twice and walks off the edge.
  const TipPose once = target_centre({-0.9, 0.0}, cfg, ws);
  EXPECT_THROW(target_centre(once, cfg, ws), WorkspaceError);
}

TEST(Ablation, FibreAxisRoundTripsWithTarget) {
  const AblationConfig cfg;
  const Workspace ws;
  const TipPose here{0.2, 0.4};
  const Vec2 fibre = fibre_axis_um(target_centre(here, cfg, ws), cfg);
  EXPECT_NEAR(fibre.x, 200.0, 1e-9);
  EXPECT_NEAR(fibre.y, 400.0, 1e-9);
}

TEST(Ablation, FireMarksTheTissueUnderTheFibre) {
  Scene s = make_uniform(0.8, 1.0);
  const AblationConfig cfg;
  const Interlock lock;
  const AblationMark m = fire(s, {0.0, 0.0}, cfg, lock);
  EXPECT_EQ(m.centre_um, (Vec2{0.0, 0.0}));
  EXPECT_EQ(s.sample({0.0, 0.0}).intensity, 0.0);
  EXPECT_EQ(s.sample({51.0, 0.0}).intensity, 0.0);
  EXPECT_NEAR(s.sample({52.0 + 25.0, 0.0}).intensity, 0.4, 1e-6);
  EXPECT_NEAR(s.sample({0.0, 200.0}).intensity, 0.8, 1e-6);
}

TEST(Ablation, FireRecordsTissueCoordinates) {
  Scene s = make_uniform(0.8, 1.0);
  s.rigid_offset_um = {30.0, -10.0};
  const AblationMark m = fire(s, {0.0, 0.0}, AblationConfig{}, Interlock{});
  EXPECT_EQ(m.centre_um, (Vec2{-30.0, 10.0}));
}

TEST(Ablation, RefusedWhileScanning) {
  Scene s = make_uniform(0.8, 1.0);
  Interlock lock;
  {
    const Interlock::ScanGuard guard(&lock);
    EXPECT_THROW(fire(s, {}, AblationConfig{}, lock), InterlockError);
  }
  EXPECT_TRUE(s.marks().empty());
  EXPECT_NO_THROW(fire(s, {}, AblationConfig{}, lock));
  EXPECT_EQ(s.marks().size(), 1u);
}

TEST(Ablation, InstrumentRefusesRepositionWhileScanning) {
  ScenarioConfig cfg;
  cfg.phantom.kind = PhantomKind::Uniform;
  cfg.phantom.extent_mm = 2.0;
  auto inst = build_instrument(cfg);
  inst->move_to({0.5, 0.0});
  {
    const Interlock::ScanGuard guard(inst->interlock());
    EXPECT_THROW(inst->move_to({0.0, 0.0}), InterlockError);
    EXPECT_THROW(inst->fire(cfg.ablation), InterlockError);
  }
  EXPECT_EQ(inst->tip().x_mm, 0.5);
  const AblationMark m = inst->fire(cfg.ablation);
  EXPECT_NEAR(m.centre_um.x, 1000.0, 1e-9);
}

TEST(Ablation, ConfigValidation) {
  AblationConfig bad;
  bad.mark_diameter_um = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = AblationConfig{};
  bad.thermal_spread_um = -1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = AblationConfig{};
  bad.lateral_offset_um = {NAN, 0.0};
  EXPECT_THROW(bad.validate(), ConfigError);
}
