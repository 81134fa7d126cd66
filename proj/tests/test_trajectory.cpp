#include "endoscan/trajectory.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace endoscan;
using testsupport::for_all;
using testsupport::Gen;

namespace {

double dist(const PlanPoint &a, const PlanPoint &b) { return std::hypot(a.x_mm - b.x_mm, a.y_mm - b.y_mm); }

// Arc length of r = b phi by trapezoidal integration of |dr/dphi|.
double numeric_arc_length(double b, double phi_end) {
  const int n = 200000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double p0 = phi_end * i / n;
    const double p1 = phi_end * (i + 1) / n;
    const double f0 = b * std::sqrt(1.0 + p0 * p0);
    const double f1 = b * std::sqrt(1.0 + p1 * p1);
    s += 0.5 * (f0 + f1) * (p1 - p0);
  }
  return s;
}

} // namespace

TEST(Trajectory, LinearScanExamples) {
  ScanParams p;
  p.length_mm = 2.0;
  p.centre_mm = {-1.0, 0.25};
  const ScanPlan plan = linear_scan(p, Workspace{});
  ASSERT_EQ(plan.size(), 241u);
  EXPECT_EQ(plan.points[0].x_mm, -1.0);
  EXPECT_EQ(plan.points[0].y_mm, 0.25);
  EXPECT_NEAR(plan.points[12].x_mm - plan.points[0].x_mm, 0.1, 1e-12);
  for (std::size_t i = 1; i < plan.size(); ++i) {
    ASSERT_NEAR(dist(plan.points[i], plan.points[i - 1]), 1.0 / 120.0, 1e-12);
    ASSERT_NEAR(plan.points[i].t_s - plan.points[i - 1].t_s, 1.0 / 120.0, 1e-12);
  }
}

TEST(Trajectory, PlanOutsideWorkspaceNamesTheIndex) {
  ScanParams p;
  p.length_mm = 3.0;
  p.centre_mm = {0.0, 0.0};
  try {
    linear_scan(p, Workspace{});
    FAIL() << "expected PlanError";
  } catch (const PlanError &e) {
    // x = i / 120 first exceeds 1.85 at i = 223.
    EXPECT_EQ(e.index(), 223u);
  }
}

TEST(Trajectory, RasterSingleRowIsLinear) {
  ScanParams p;
  p.length_mm = 1.0;
  const ScanPlan a = raster_scan(p, 1, 0.2, Workspace{});
  const ScanPlan b = linear_scan(p, Workspace{});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.points[i].x_mm, b.points[i].x_mm);
    EXPECT_EQ(a.points[i].y_mm, b.points[i].y_mm);
  }
}

TEST(Trajectory, RasterRowsAndConstantSpeed) {
  ScanParams p;
  p.length_mm = 3.0;
  p.centre_mm = {-1.5, -0.3};
  const ScanPlan plan = raster_scan(p, 4, 0.2, Workspace{});
  // Points on each straight row share a y value 0.2 mm apart.
  std::vector<int> per_row(4, 0);
  for (const auto &pt : plan.points) {
    for (int k = 0; k < 4; ++k) {
      if (std::abs(pt.y_mm - (-0.3 + 0.2 * k)) < 1e-12) {
        ++per_row[k];
      }
    }
  }
  for (int k = 0; k < 4; ++k) {
    EXPECT_GT(per_row[k], 300) << "row " << k;
  }
  // Chord length never exceeds the arc spacing and equals it on straights.
  const double s = 1.0 / 120.0;
  for (std::size_t i = 1; i < plan.size(); ++i) {
    const double d = dist(plan.points[i], plan.points[i - 1]);
    ASSERT_LE(d, s + 1e-12);
    if (plan.points[i].y_mm == plan.points[i - 1].y_mm) {
      ASSERT_NEAR(d, s, 1e-12);
    }
  }
}

TEST(Trajectory, SpiralEndpointsAndDuration) {
  ScanParams p;
  p.spiral_pitch_mm = 0.18;
  p.max_radius_mm = 0.43;
  p.centre_mm = {0.2, -0.1};
  const ScanPlan plan = spiral_scan(p, Workspace{});
  ASSERT_FALSE(plan.empty());
  EXPECT_EQ(plan.points.front().x_mm, 0.2);
  EXPECT_EQ(plan.points.front().y_mm, -0.1);
  const PlanPoint &last = plan.points.back();
  const double r_last = std::hypot(last.x_mm - 0.2, last.y_mm + 0.1);
  EXPECT_LE(r_last, 0.43);
  EXPECT_GT(r_last, 0.43 - p.spacing_mm());

  const double b = 0.18 / (2.0 * kPi);
  const double phi_end = 0.43 / b;
  const double total = numeric_arc_length(b, phi_end);
  EXPECT_NEAR(spiral_arc_length(b, phi_end), total, 1e-9);
  EXPECT_NEAR(plan.duration_s(), total / p.speed_mm_per_s, 1.0 / 120.0);
}

TEST(Trajectory, SpiralSpacingProperty) {
  for_all(20, 21, [](Gen &gen, int) {
    ScanParams p;
    p.spiral_pitch_mm = gen.real(0.05, 0.24);
    p.max_radius_mm = gen.real(0.3, 1.2);
    p.speed_mm_per_s = gen.real(0.5, 3.0);
    const ScanPlan plan = spiral_scan(p, Workspace{});
    const double s = p.spacing_mm();
    for (std::size_t i = 1; i < plan.size(); ++i) {
      const double r = std::hypot(plan.points[i].x_mm, plan.points[i].y_mm);
      ASSERT_NEAR(plan.points[i].t_s - plan.points[i - 1].t_s, 1.0 / p.point_frequency_hz, 1e-12);
      if (r > 2.0 * p.spiral_pitch_mm) {
        ASSERT_NEAR(dist(plan.points[i], plan.points[i - 1]), s, 0.02 * s);
      }
    }
  });
}

TEST(Trajectory, SpiralCoverageWhenPitchWithinFieldOfView) {
  ScanParams p;
  p.spiral_pitch_mm = 0.144;
  p.max_radius_mm = 0.5;
  const double fov = 0.24;
  const ScanPlan plan = spiral_scan(p, Workspace{}, fov);
  // Rasterise the FOV-dilated path on a 5 um grid.
  const double h = 0.005;
  const double reach = p.max_radius_mm + fov;
  const int n = static_cast<int>(2 * reach / h);
  std::vector<char> hit(static_cast<std::size_t>(n) * n, 0);
  const int rr = static_cast<int>(std::ceil(0.5 * fov / h));
  for (const auto &pt : plan.points) {
    const int cx = static_cast<int>((pt.x_mm + reach) / h);
    const int cy = static_cast<int>((pt.y_mm + reach) / h);
    for (int dy = -rr; dy <= rr; ++dy) {
      for (int dx = -rr; dx <= rr; ++dx) {
        const double ox = (cx + dx + 0.5) * h - reach - pt.x_mm;
        const double oy = (cy + dy + 0.5) * h - reach - pt.y_mm;
        if (ox * ox + oy * oy <= 0.25 * fov * fov) {
          hit[static_cast<std::size_t>(cy + dy) * n + cx + dx] = 1;
        }
      }
    }
  }
  // The last turn sweeps radii from R - pitch to R, so the disc out to
  // R - pitch + fov/2 must be covered without gaps.
  const double inner = p.max_radius_mm - p.spiral_pitch_mm + 0.5 * fov - 2.0 * h;
  std::size_t missed = 0;
  std::size_t cells = 0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      if (std::hypot((x + 0.5) * h - reach, (y + 0.5) * h - reach) <= inner) {
        ++cells;
        missed += hit[static_cast<std::size_t>(y) * n + x] == 0;
      }
    }
  }
  EXPECT_GT(cells, 20000u);
  EXPECT_EQ(missed, 0u);
}

TEST(Trajectory, SpiralOverlapWarnings) {
  ScanParams p;
  p.spiral_pitch_mm = 0.3;
  EXPECT_TRUE(spiral_scan(p, Workspace{}, 0.24).warnings & kCoverageGap);
  p.spiral_pitch_mm = 0.02;
  p.max_radius_mm = 0.1;
  EXPECT_TRUE(spiral_scan(p, Workspace{}, 0.24).warnings & kExcessiveOverlap);
  p.spiral_pitch_mm = 0.144;
  EXPECT_EQ(spiral_scan(p, Workspace{}, 0.24).warnings, kPlanOk);
}

TEST(Trajectory, NearestPlanPoint) {
  ScanParams p;
  p.length_mm = 0.5;
  const ScanPlan plan = linear_scan(p, Workspace{});
  const auto exact = nearest_plan_point(plan, 12.0 / 120.0);
  EXPECT_EQ(exact.index, 12u);
  EXPECT_FALSE(exact.end_of_plan);
  const auto mid = nearest_plan_point(plan, 12.5 / 120.0);
  EXPECT_EQ(mid.index, 12u);
  const auto late = nearest_plan_point(plan, plan.duration_s() + 1.0);
  EXPECT_EQ(late.index, plan.size() - 1);
  EXPECT_TRUE(late.end_of_plan);
  EXPECT_FALSE(nearest_plan_point(plan, plan.duration_s()).end_of_plan);
  EXPECT_THROW(nearest_plan_point(ScanPlan{}, 0.0), PlanError);
}

TEST(Trajectory, NearestPlanPointIsClosestInTime) {
  ScanParams p;
  p.length_mm = 1.0;
  const ScanPlan plan = linear_scan(p, Workspace{});
  for_all(2000, 22, [&](Gen &gen, int) {
    const double t = gen.real(0.0, plan.duration_s());
    const auto got = nearest_plan_point(plan, t);
    double best = 1e9;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < plan.size(); ++i) {
      const double d = std::abs(plan.points[i].t_s - t);
      if (d < best - 1e-15) {
        best = d;
        best_i = i;
      }
    }
    ASSERT_EQ(got.index, best_i);
  });
}

TEST(Trajectory, CsvFormat) {
  ScanParams p;
  p.length_mm = 1.0 / 60.0;
  std::ostringstream out;
  write_plan_csv(out, linear_scan(p, Workspace{}));
  EXPECT_EQ(out.str(), "t_s,x_mm,y_mm\n0.000000,0.000000,0.000000\n0.008333,0.008333,0.000000\n"
                       "0.016667,0.016667,0.000000\n");
}
