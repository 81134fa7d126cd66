#pragma once

#include "endoscan/common.hpp"
#include "endoscan/kinematics.hpp"

#include <cstddef>
#include <ostream>
#include <vector>

namespace endoscan {

struct ScanParams {
  double point_frequency_hz = 120.0;
  double speed_mm_per_s = 1.0;
  // Linear and raster scans.
  double length_mm = 2.0;
  // Spiral scans.
  double spiral_pitch_mm = 0.144;
  double max_radius_mm = 0.43;
  Vec2 centre_mm{};

  void validate(const Workspace &ws) const;
  double spacing_mm() const { return speed_mm_per_s / point_frequency_hz; }
};

struct PlanPoint {
  double t_s = 0.0;
  double x_mm = 0.0;
  double y_mm = 0.0;

  TipPose pose() const { return {x_mm, y_mm}; }
};

enum PlanWarning : unsigned {
  kPlanOk = 0,
  // Adjacent spiral turns further apart than the field of view.
  kCoverageGap = 1u << 0,
  // Adjacent spiral turns overlap by more than 90% of the field of view.
  kExcessiveOverlap = 1u << 1,
};

struct ScanPlan {
  std::vector<PlanPoint> points;
  double point_frequency_hz = 0.0;
  unsigned warnings = kPlanOk;

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
  double duration_s() const { return points.empty() ? 0.0 : points.back().t_s; }
};

// x_i = x_c + i u_s / f_s for i = 0..n_p, n_p = floor(l_s f_s / u_s).
ScanPlan linear_scan(const ScanParams &params, const Workspace &ws);

// Serpentine rows along +x, stacked along +y, joined by semicircular turns.
ScanPlan raster_scan(const ScanParams &params, int rows, double row_spacing_mm, const Workspace &ws);

// Archimedean spiral r = pitch/(2 pi) * phi from the centre outwards, sampled at
// constant arc length. fov_mm only drives the overlap warnings.
ScanPlan spiral_scan(const ScanParams &params, const Workspace &ws, double fov_mm = 0.24);

// Closed-form arc length of r = b * phi from phi = 0.
double spiral_arc_length(double b_mm_per_rad, double phi_rad);

struct PlanLookup {
  PlanPoint point;
  std::size_t index = 0;
  bool end_of_plan = false;
};

// Plan sample closest in time to t; ties go to the earlier sample.
PlanLookup nearest_plan_point(const ScanPlan &plan, double t_s);

// CSV with header t_s,x_mm,y_mm and 6 decimal places.
void write_plan_csv(std::ostream &out, const ScanPlan &plan);

} // namespace endoscan
