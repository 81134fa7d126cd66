#include "endoscan/mosaic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>

namespace endoscan {

namespace {

struct Pt {
  long x;
  long y;
};

long cross(const Pt &o, const Pt &a, const Pt &b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

// Andrew's monotone chain.
std::vector<Pt> convex_hull(std::vector<Pt> pts) {
  std::sort(pts.begin(), pts.end(), [](const Pt &a, const Pt &b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  if (pts.size() < 3) {
    return pts;
  }
  std::vector<Pt> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto &p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) {
      --k;
    }
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) {
      --k;
    }
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

struct Stats {
  double mean = 0.0;
  double sd = 0.0;
};

Stats mean_sd(const std::vector<double> &v) {
  Stats s;
  if (v.empty()) {
    return s;
  }
  for (const double x : v) {
    s.mean += x;
  }
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double acc = 0.0;
    for (const double x : v) {
      acc += (x - s.mean) * (x - s.mean);
    }
    s.sd = std::sqrt(acc / static_cast<double>(v.size() - 1));
  }
  return s;
}

struct Levels {
  double threshold;
  double lo;
  double hi;
};

// Otsu split on a 256-bin histogram, then the midpoint of the two class means.
Levels two_level_threshold(const Image &img, const std::vector<std::uint8_t> *valid) {
  std::array<double, 256> hist{};
  std::array<double, 256> bin_sum{};
  const auto data = img.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (valid && !(*valid)[i]) {
      continue;
    }
    const double v = std::clamp<double>(data[i], 0.0, 1.0);
    const auto b = std::min<std::size_t>(255, static_cast<std::size_t>(v * 256.0));
    hist[b] += 1.0;
    bin_sum[b] += v;
  }
  double total = 0.0;
  double total_sum = 0.0;
  for (std::size_t b = 0; b < 256; ++b) {
    total += hist[b];
    total_sum += bin_sum[b];
  }
  if (total == 0.0) {
    throw Error("grid measurement needs valid pixels");
  }
  double best = -1.0;
  double lo = 0.0;
  double hi = 0.0;
  double w0 = 0.0;
  double s0 = 0.0;
  for (std::size_t b = 0; b + 1 < 256; ++b) {
    w0 += hist[b];
    s0 += bin_sum[b];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) {
      continue;
    }
    const double m0 = s0 / w0;
    const double m1 = (total_sum - s0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      lo = m0;
      hi = m1;
    }
  }
  if (best <= 0.0) {
    throw Error("grid measurement needs two intensity levels");
  }
  return {0.5 * (lo + hi), lo, hi};
}

// Runs between consecutive threshold crossings along one profile. Only runs
// with a crossing at both ends are reported.
void profile_runs(const std::vector<float> &prof, const Levels &lv, double um_per_px, const GridSpec &expected,
                  std::vector<double> &bright, std::vector<double> &dark) {
  const double margin = 0.25 * (lv.hi - lv.lo);
  double last_cross = -1.0;
  bool have_cross = false;
  float extreme = 0.0f;
  for (std::size_t i = 1; i < prof.size(); ++i) {
    const bool a = prof[i - 1] >= lv.threshold;
    const bool b = prof[i] >= lv.threshold;
    if (a == b) {
      extreme = a ? std::max(extreme, prof[i]) : std::min(extreme, prof[i]);
      continue;
    }
    const double pos = static_cast<double>(i - 1) + (lv.threshold - prof[i - 1]) / (prof[i] - prof[i - 1]);
    if (have_cross) {
      const double len_um = (pos - last_cross) * um_per_px;
      if (a) {
        if (len_um >= 0.5 * expected.line_thickness_um && len_um <= 1.6 * expected.line_thickness_um &&
            extreme >= lv.threshold + margin) {
          bright.push_back(len_um);
        }
      } else if (len_um >= 0.5 * expected.square_width_um && len_um <= 1.4 * expected.square_width_um &&
                 extreme <= lv.threshold - margin) {
        dark.push_back(len_um);
      }
    }
    have_cross = true;
    last_cross = pos;
    extreme = prof[i];
  }
}

} // namespace

double measure_mosaic_diameter_mm(const MosaicCanvas &canvas) {
  std::vector<Pt> boundary;
  const int w = canvas.width();
  const int h = canvas.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!canvas.valid_at(x, y)) {
        continue;
      }
      const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1 || !canvas.valid_at(x - 1, y) ||
                        !canvas.valid_at(x + 1, y) || !canvas.valid_at(x, y - 1) || !canvas.valid_at(x, y + 1);
      if (edge) {
        boundary.push_back({x, y});
      }
    }
  }
  if (boundary.empty()) {
    throw Error("cannot measure an empty mosaic");
  }
  const auto hull = convex_hull(std::move(boundary));
  double best2 = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    for (std::size_t j = i + 1; j < hull.size(); ++j) {
      const double dx = static_cast<double>(hull[i].x - hull[j].x);
      const double dy = static_cast<double>(hull[i].y - hull[j].y);
      best2 = std::max(best2, dx * dx + dy * dy);
    }
  }
  // Centre-to-centre caliper plus one pixel for the pixel extents.
  return (std::sqrt(best2) + 1.0) * canvas.um_per_px() / 1000.0;
}

GridMeasurement measure_grid(const Image &img, const std::vector<std::uint8_t> *valid, double um_per_px,
                             const GridSpec &expected, std::size_t min_crossings) {
  expected.validate();
  if (valid && valid->size() != img.size()) {
    throw Error("valid mask does not match the image");
  }
  const Levels lv = two_level_threshold(img, valid);
  const int step = 3;
  std::vector<double> bright;
  std::vector<double> dark;
  std::vector<float> prof;

  auto flush_segment = [&]() {
    if (prof.size() > 1) {
      profile_runs(prof, lv, um_per_px, expected, bright, dark);
    }
    prof.clear();
  };
  auto ok = [&](int x, int y) {
    return !valid || (*valid)[static_cast<std::size_t>(y) * img.width() + static_cast<std::size_t>(x)] != 0;
  };
  for (int y = step / 2; y < img.height(); y += step) {
    for (int x = 0; x < img.width(); ++x) {
      if (ok(x, y)) {
        prof.push_back(img.at(x, y));
      } else {
        flush_segment();
      }
    }
    flush_segment();
  }
  for (int x = step / 2; x < img.width(); x += step) {
    for (int y = 0; y < img.height(); ++y) {
      if (ok(x, y)) {
        prof.push_back(img.at(x, y));
      } else {
        flush_segment();
      }
    }
    flush_segment();
  }
  if (bright.size() < min_crossings || dark.size() < min_crossings) {
    throw Error("too few grid crossings detected (" + std::to_string(bright.size()) + " lines, " +
                std::to_string(dark.size()) + " squares)");
  }
  GridMeasurement m;
  const Stats t = mean_sd(bright);
  const Stats s = mean_sd(dark);
  m.thickness_mean_um = t.mean;
  m.thickness_sd_um = t.sd;
  m.thickness_count = bright.size();
  m.width_mean_um = s.mean;
  m.width_sd_um = s.sd;
  m.width_count = dark.size();
  return m;
}

GridMeasurement measure_grid(const MosaicCanvas &canvas, const GridSpec &expected, std::size_t min_crossings) {
  return measure_grid(canvas.pixels(), &canvas.valid(), canvas.um_per_px(), expected, min_crossings);
}

std::optional<DarkDisc> measure_dark_disc(const MosaicCanvas &canvas, Vec2 near_px, double threshold,
                                          double search_radius_px) {
  const int w = canvas.width();
  const int h = canvas.height();
  const auto &px = canvas.pixels();
  auto in_reach = [&](int x, int y) {
    const double dx = x + 0.5 - near_px.x;
    const double dy = y + 0.5 - near_px.y;
    return dx * dx + dy * dy <= search_radius_px * search_radius_px;
  };
  auto dark = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < w && y < h && canvas.valid_at(x, y) && px.at(x, y) < threshold && in_reach(x, y);
  };

  // Seed: the dark pixel closest to near_px.
  const int r = static_cast<int>(std::ceil(search_radius_px));
  const int cx = static_cast<int>(std::floor(near_px.x));
  const int cy = static_cast<int>(std::floor(near_px.y));
  double best = 1e300;
  Pt seed{-1, -1};
  for (int y = cy - r; y <= cy + r; ++y) {
    for (int x = cx - r; x <= cx + r; ++x) {
      if (!dark(x, y)) {
        continue;
      }
      const double d = std::hypot(x + 0.5 - near_px.x, y + 0.5 - near_px.y);
      if (d < best) {
        best = d;
        seed = {x, y};
      }
    }
  }
  if (seed.x < 0) {
    return std::nullopt;
  }

  std::vector<std::uint8_t> seen(static_cast<std::size_t>(w) * h, 0);
  std::deque<Pt> queue{seed};
  seen[static_cast<std::size_t>(seed.y) * w + seed.x] = 1;
  double sx = 0.0;
  double sy = 0.0;
  double n = 0.0;
  while (!queue.empty()) {
    const Pt p = queue.front();
    queue.pop_front();
    sx += p.x + 0.5;
    sy += p.y + 0.5;
    n += 1.0;
    const std::array<Pt, 4> nb{{{p.x - 1, p.y}, {p.x + 1, p.y}, {p.x, p.y - 1}, {p.x, p.y + 1}}};
    for (const auto &q : nb) {
      if (!dark(static_cast<int>(q.x), static_cast<int>(q.y))) {
        continue;
      }
      auto &s = seen[static_cast<std::size_t>(q.y) * w + q.x];
      if (!s) {
        s = 1;
        queue.push_back(q);
      }
    }
  }
  DarkDisc disc;
  disc.centroid_px = {sx / n, sy / n};
  disc.area_px = n;
  disc.diameter_um = 2.0 * std::sqrt(n / kPi) * canvas.um_per_px();
  return disc;
}

} // namespace endoscan
