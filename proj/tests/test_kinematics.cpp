#include "endoscan/kinematics.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace endoscan;
using testsupport::for_all;
using testsupport::Gen;

namespace {

// Cantilever with a point load F at distance a from the fixation, evaluated
// from the textbook deflection and slope at the load point, then carried as a
// straight line to the free end at S_l. Independent of the library's formula.
double cantilever_tip_deflection(double r_p, double s_l, double a, double e_n_mm2, double i_mm4) {
  const double f = 3.0 * e_n_mm2 * i_mm4 * r_p / (a * a * a); // from r_p = F a^3 / (3 E I)
  const double slope = f * a * a / (2.0 * e_n_mm2 * i_mm4);
  return r_p + slope * (s_l - a);
}

} // namespace

TEST(Kinematics, VoltsToAnglesExamples) {
  const ScannerGeometry g;
  const MotorAngles full = volts_to_angles({20.0, 0.0}, g);
  EXPECT_NEAR(full.theta1_deg, 46.876, 1e-12);
  EXPECT_EQ(full.theta2_deg, 0.0);
  const MotorAngles unit = volts_to_angles({1.0, -1.0}, g);
  EXPECT_DOUBLE_EQ(unit.theta1_deg, 2.3438);
  EXPECT_DOUBLE_EQ(unit.theta2_deg, -2.3438);
  const MotorAngles zero = volts_to_angles({0.0, 0.0}, g);
  EXPECT_EQ(zero.theta1_deg, 0.0);
  EXPECT_EQ(zero.theta2_deg, 0.0);
}

TEST(Kinematics, VoltsToAnglesRejectsOverdriveNamingTheAxis) {
  const ScannerGeometry g;
  try {
    volts_to_angles({0.0, 20.5}, g);
    FAIL() << "expected RangeError";
  } catch (const RangeError &e) {
    EXPECT_EQ(e.axis(), 2);
  }
  EXPECT_THROW(volts_to_angles({-21.0, 0.0}, g), RangeError);
}

TEST(Kinematics, SecondMomentOfArea) {
  ScannerGeometry g;
  // Independent evaluation: (3.3^4 - 2.7^4) = 118.5921 - 53.1441 = 65.448; times pi/64.
  EXPECT_NEAR(second_moment_of_area(g), 65.448 * 3.14159265358979323846 / 64.0, 1e-12);
  EXPECT_NEAR(second_moment_of_area(g), 3.2127, 1e-4);
  g.outer_diameter_mm = 2.0;
  g.inner_diameter_mm = 0.0;
  EXPECT_NEAR(second_moment_of_area(g), 0.785398163, 1e-9);
  g.outer_diameter_mm = 3.3;
  g.inner_diameter_mm = 3.3;
  EXPECT_THROW(second_moment_of_area(g), GeometryError);
}

TEST(Kinematics, CamToTipExamples) {
  const ScannerGeometry g;
  EXPECT_DOUBLE_EQ(beam_amplification(g), 2.5);
  const TipPose unit = cam_to_tip({0.0, 1.0}, g);
  EXPECT_NEAR(std::hypot(unit.x_mm, unit.y_mm), 2.5, 1e-12);
  const TipPose x = cam_to_tip({0.4, 0.0}, g);
  EXPECT_NEAR(x.x_mm, 1.0, 1e-12);
  EXPECT_NEAR(x.y_mm, 0.0, 1e-12);
  const TipPose zero = cam_to_tip({0.0, 0.0}, g);
  EXPECT_EQ(zero.x_mm, 0.0);
  EXPECT_EQ(zero.y_mm, 0.0);
}

TEST(Kinematics, BeamChainMatchesIndependentCantileverModel) {
  for_all(10000, 11, [](Gen &gen, int) {
    ScannerGeometry g;
    g.shaft_length_mm = gen.real(20.0, 100.0);
    g.cam_position_mm = gen.real(0.1, 0.95) * g.shaft_length_mm;
    g.outer_diameter_mm = gen.real(1.0, 5.0);
    g.inner_diameter_mm = gen.real(0.0, 0.95) * g.outer_diameter_mm;
    g.elastic_modulus_gpa = gen.real(50.0, 400.0);
    const CamPoint p{gen.real(-0.8, 0.8), gen.real(-0.8, 0.8)};
    const double r_p = std::hypot(p.x_mm, p.y_mm);
    const double i = 3.14159265358979323846 / 64.0 *
                     (std::pow(g.outer_diameter_mm, 4) - std::pow(g.inner_diameter_mm, 4));
    const double oracle =
        cantilever_tip_deflection(r_p, g.shaft_length_mm, g.cam_position_mm, g.elastic_modulus_gpa * 1e3, i);
    const TipPose tip = cam_to_tip(p, g);
    const double delta = std::hypot(tip.x_mm, tip.y_mm);
    ASSERT_NEAR(delta, oracle, 1e-12 * oracle + 1e-300);
    // Direction is preserved: tip is a positive multiple of the cam deflection.
    ASSERT_NEAR(tip.x_mm * p.y_mm - tip.y_mm * p.x_mm, 0.0, 1e-12 * delta * r_p + 1e-300);
  });
}

TEST(Kinematics, ElasticModulusCancels) {
  for_all(500, 12, [](Gen &gen, int) {
    ScannerGeometry g;
    const CamPoint p{gen.real(-0.7, 0.7), gen.real(-0.7, 0.7)};
    const TipPose a = cam_to_tip(p, g);
    g.elastic_modulus_gpa *= 2.0;
    const TipPose b = cam_to_tip(p, g);
    ASSERT_EQ(a.x_mm, b.x_mm);
    ASSERT_EQ(a.y_mm, b.y_mm);
  });
}

TEST(Kinematics, BeamChainAgreesWithCalibratedScale) {
  const ScannerGeometry g;
  const TipPose t = beam_chain_tip({1.0, 0.0}, g);
  EXPECT_NEAR(t.x_mm, 0.664, 1e-12);
  EXPECT_NEAR(t.y_mm, 0.0, 1e-12);
}

TEST(Kinematics, VoltsToTipExamples) {
  const ScannerGeometry g;
  const Workspace ws;
  const auto a = volts_to_tip({1.0, 0.0}, g, ws);
  EXPECT_NEAR(a.value.x_mm, 0.664, 1e-12);
  EXPECT_FALSE(a.saturated);
  const auto b = volts_to_tip({-0.5, 0.5}, g, ws);
  EXPECT_NEAR(b.value.x_mm, -0.332, 1e-12);
  EXPECT_NEAR(b.value.y_mm, 0.332, 1e-12);
  const auto c = tip_to_volts({0.664, 0.0}, g, ws);
  EXPECT_NEAR(c.value.v1, 1.0, 1e-12);
  EXPECT_EQ(c.value.v2, 0.0);
}

TEST(Kinematics, SaturationClampsAndFlags) {
  const ScannerGeometry g;
  const Workspace ws;
  const auto out = volts_to_tip({5.0, -1.0}, g, ws);
  EXPECT_TRUE(out.saturated);
  EXPECT_DOUBLE_EQ(out.value.x_mm, 1.85);
  EXPECT_NEAR(out.value.y_mm, -0.664, 1e-12);
  const auto back = tip_to_volts({-3.0, 0.0}, g, ws);
  EXPECT_TRUE(back.saturated);
  EXPECT_NEAR(back.value.v1, -1.85 / 0.664, 1e-12);
}

TEST(Kinematics, RoundTripInsideWorkspace) {
  const ScannerGeometry g;
  Workspace ws;
  ws.centre = {0.1, -0.2};
  for_all(10000, 13, [&](Gen &gen, int) {
    const TipPose p{ws.centre.x_mm + gen.real(-1.85, 1.85), ws.centre.y_mm + gen.real(-1.85, 1.85)};
    const auto v = tip_to_volts(p, g, ws);
    ASSERT_FALSE(v.saturated);
    const auto back = volts_to_tip(v.value, g, ws);
    ASSERT_LT(std::hypot(back.value.x_mm - p.x_mm, back.value.y_mm - p.y_mm), 1e-9);
  });
}

TEST(Kinematics, VoltsToTipIsAffine) {
  const ScannerGeometry g;
  const Workspace ws;
  for_all(1000, 14, [&](Gen &gen, int) {
    const MotorCommand a{gen.real(-1.3, 1.3), gen.real(-1.3, 1.3)};
    const MotorCommand b{gen.real(-1.3, 1.3), gen.real(-1.3, 1.3)};
    const TipPose ta = volts_to_tip(a, g, ws).value;
    const TipPose tb = volts_to_tip(b, g, ws).value;
    const TipPose tab = volts_to_tip({a.v1 + b.v1, a.v2 + b.v2}, g, ws).value;
    // Centre is zero, so the map is linear.
    ASSERT_NEAR(tab.x_mm, ta.x_mm + tb.x_mm, 1e-12);
    ASSERT_NEAR(tab.y_mm, ta.y_mm + tb.y_mm, 1e-12);
  });
}

TEST(Kinematics, WorkspaceArea) {
  const Workspace ws;
  EXPECT_NEAR(ws.area_mm2(), 13.69, 1e-12);
  EXPECT_LT(std::abs(ws.area_mm2() - 14.0), 0.5);
}

TEST(Kinematics, GeometryValidation) {
  ScannerGeometry g;
  EXPECT_NO_THROW(g.validate());
  g.cam_position_mm = 60.0;
  EXPECT_THROW(g.validate(), GeometryError);
}
