#include "endoscan/trajectory.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace endoscan {

void ScanParams::validate(const Workspace &ws) const {
  std::ostringstream err;
  if (!(point_frequency_hz > 0.0)) {
    err << "point frequency must be positive; ";
  }
  if (!(speed_mm_per_s > 0.0)) {
    err << "speed must be positive; ";
  }
  if (!(spiral_pitch_mm > 0.0)) {
    err << "spiral pitch must be positive; ";
  }
  if (!(max_radius_mm >= 0.0 && max_radius_mm <= ws.half_width_mm)) {
    err << "max radius must lie within the workspace half-width; ";
  }
  if (!(length_mm >= 0.0)) {
    err << "length must be non-negative; ";
  }
  if (!err.str().empty()) {
    throw PlanError(0, err.str());
  }
}

namespace {

void check_inside(const ScanPlan &plan, const Workspace &ws) {
  for (std::size_t i = 0; i < plan.points.size(); ++i) {
    if (!ws.contains(plan.points[i].pose(), 1e-9)) {
      std::ostringstream msg;
      msg << "plan point " << i << " (" << plan.points[i].x_mm << ", " << plan.points[i].y_mm
          << ") mm leaves the workspace";
      throw PlanError(i, msg.str());
    }
  }
}

double sample_time(std::size_t i, double f_s) { return static_cast<double>(i) / f_s; }

// Distance travelled by sample i.
double sample_distance(std::size_t i, const ScanParams &p) {
  return static_cast<double>(i) * p.speed_mm_per_s / p.point_frequency_hz;
}

struct Segment {
  bool arc = false;
  Vec2 start{};
  Vec2 end{};
  Vec2 centre{};
  double radius = 0.0;
  double start_angle = 0.0;
  double sweep = 0.0; // signed, radians

  double length() const { return arc ? std::abs(sweep) * radius : (end - start).norm(); }
  Vec2 at(double s) const {
    if (!arc) {
      const double len = length();
      return len > 0.0 ? start + (end - start) * (s / len) : start;
    }
    const double a = start_angle + (sweep > 0 ? 1.0 : -1.0) * s / radius;
    return centre + Vec2{radius * std::cos(a), radius * std::sin(a)};
  }
};

} // namespace

ScanPlan linear_scan(const ScanParams &params, const Workspace &ws) {
  params.validate(ws);
  ScanPlan plan;
  plan.point_frequency_hz = params.point_frequency_hz;
  const auto n_p = static_cast<std::size_t>(
      std::floor(params.length_mm * params.point_frequency_hz / params.speed_mm_per_s + 1e-9));
  plan.points.reserve(n_p + 1);
  for (std::size_t i = 0; i <= n_p; ++i) {
    plan.points.push_back({sample_time(i, params.point_frequency_hz),
                           params.centre_mm.x + sample_distance(i, params), params.centre_mm.y});
  }
  check_inside(plan, ws);
  return plan;
}

ScanPlan raster_scan(const ScanParams &params, int rows, double row_spacing_mm, const Workspace &ws) {
  params.validate(ws);
  if (rows < 1) {
    throw PlanError(0, "raster needs at least one row");
  }
  if (rows > 1 && !(row_spacing_mm > 0.0)) {
    throw PlanError(0, "raster row spacing must be positive");
  }
  if (rows == 1) {
    return linear_scan(params, ws);
  }

  const double x0 = params.centre_mm.x;
  const double x1 = x0 + params.length_mm;
  const double turn_r = 0.5 * row_spacing_mm;
  std::vector<Segment> path;
  for (int k = 0; k < rows; ++k) {
    const double y = params.centre_mm.y + k * row_spacing_mm;
    const bool forward = (k % 2) == 0;
    Segment line;
    line.start = {forward ? x0 : x1, y};
    line.end = {forward ? x1 : x0, y};
    path.push_back(line);
    if (k + 1 < rows) {
      Segment turn;
      turn.arc = true;
      turn.radius = turn_r;
      turn.centre = {forward ? x1 : x0, y + turn_r};
      turn.start_angle = -0.5 * kPi;
      // Right-hand turns bulge to +x (counter-clockwise), left-hand to -x.
      turn.sweep = forward ? kPi : -kPi;
      path.push_back(turn);
    }
  }

  double total = 0.0;
  for (const auto &seg : path) {
    total += seg.length();
  }

  ScanPlan plan;
  plan.point_frequency_hz = params.point_frequency_hz;
  const auto n_p =
      static_cast<std::size_t>(std::floor(total * params.point_frequency_hz / params.speed_mm_per_s + 1e-9));
  std::size_t seg_idx = 0;
  double seg_start = 0.0;
  for (std::size_t i = 0; i <= n_p; ++i) {
    const double s = sample_distance(i, params);
    while (seg_idx + 1 < path.size() && s > seg_start + path[seg_idx].length()) {
      seg_start += path[seg_idx].length();
      ++seg_idx;
    }
    const Vec2 p = path[seg_idx].at(s - seg_start);
    plan.points.push_back({sample_time(i, params.point_frequency_hz), p.x, p.y});
  }
  check_inside(plan, ws);
  return plan;
}

double spiral_arc_length(double b, double phi) {
  return 0.5 * b * (phi * std::sqrt(1.0 + phi * phi) + std::asinh(phi));
}

ScanPlan spiral_scan(const ScanParams &params, const Workspace &ws, double fov_mm) {
  params.validate(ws);
  const double b = params.spiral_pitch_mm / (2.0 * kPi);

  ScanPlan plan;
  plan.point_frequency_hz = params.point_frequency_hz;
  if (params.spiral_pitch_mm > fov_mm) {
    plan.warnings |= kCoverageGap;
  }
  if (params.spiral_pitch_mm < 0.1 * fov_mm) {
    plan.warnings |= kExcessiveOverlap;
  }

  double phi = 0.0;
  for (std::size_t i = 0;; ++i) {
    const double target = sample_distance(i, params);
    // Newton iteration on s(phi) = target; ds/dphi = b sqrt(1 + phi^2).
    for (int iter = 0; iter < 100; ++iter) {
      const double residual = spiral_arc_length(b, phi) - target;
      if (std::abs(residual) < 1e-9) {
        break;
      }
      double next = phi - residual / (b * std::sqrt(1.0 + phi * phi));
      // Near the centre s ~ b phi^2 / 2 is flat in phi; keep the iterate non-negative.
      if (next < 0.0) {
        next = 0.5 * phi;
      }
      phi = next;
    }
    const double r = b * phi;
    if (r > params.max_radius_mm) {
      break;
    }
    plan.points.push_back({sample_time(i, params.point_frequency_hz), params.centre_mm.x + r * std::cos(phi),
                           params.centre_mm.y + r * std::sin(phi)});
    // Seed for the next sample.
    phi += params.spacing_mm() / (b * std::sqrt(1.0 + phi * phi));
  }
  check_inside(plan, ws);
  return plan;
}

PlanLookup nearest_plan_point(const ScanPlan &plan, double t_s) {
  if (plan.empty()) {
    throw PlanError(0, "nearest_plan_point on an empty plan");
  }
  const std::size_t last = plan.size() - 1;
  PlanLookup out;
  if (t_s > plan.points[last].t_s + 1e-12) {
    out.index = last;
    out.point = plan.points[last];
    out.end_of_plan = true;
    return out;
  }
  // ceil(x - 0.5) rounds half-way cases down, i.e. towards the earlier sample.
  const double pos = t_s * plan.point_frequency_hz;
  double idx = std::ceil(pos - 0.5);
  if (idx < 0.0) {
    idx = 0.0;
  }
  out.index = std::min(static_cast<std::size_t>(idx), last);
  out.point = plan.points[out.index];
  return out;
}

void write_plan_csv(std::ostream &out, const ScanPlan &plan) {
  out << "t_s,x_mm,y_mm\n";
  char buf[96];
  for (const auto &p : plan.points) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f\n", p.t_s, p.x_mm, p.y_mm);
    out << buf;
  }
}

} // namespace endoscan
