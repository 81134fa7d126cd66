#include "endoscan/endoscope.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace endoscan {

void ProbeSpec::validate() const {
  std::ostringstream err;
  if (!(fov_diameter_um > 0.0)) {
    err << "fov diameter must be positive; ";
  }
  if (!(resolution_um > 0.0)) {
    err << "resolution must be positive; ";
  }
  if (!(core_spacing_um >= 0.5 * resolution_um) || !(core_spacing_um > 0.0)) {
    err << "core spacing must be at least half the resolution; ";
  }
  if (!(frame_rate_hz > 0.0)) {
    err << "frame rate must be positive; ";
  }
  if (frame_px < 8) {
    err << "frame raster must be at least 8 px; ";
  }
  if (noise_sigma < 0.0) {
    err << "noise sigma must be non-negative; ";
  }
  if (!err.str().empty()) {
    throw ConfigError(err.str());
  }
}

Endoscope::Endoscope(ProbeSpec spec, PreprocessParams pre) : spec_(spec), pre_(std::move(pre)) {
  spec_.validate();
  if (!(pre_.gaussian_sigma_px > 0.0)) {
    throw ConfigError("preprocessing sigma must be positive");
  }
  const int n = spec_.frame_px;
  if (pre_.background && (pre_.background->width() != n || pre_.background->height() != n)) {
    throw ConfigError("background frame must match the frame raster");
  }

  const double s = spec_.core_spacing_um;
  const double row_h = s * std::sqrt(3.0) / 2.0;
  // Cores extend a little past the field stop so smoothing does not darken the rim.
  const double reach = 0.5 * spec_.fov_diameter_um + 3.0 * s;
  const int jmax = static_cast<int>(std::ceil(reach / row_h)) + 1;
  const int kmax = static_cast<int>(std::ceil(reach / s)) + 1;
  const int cols = 2 * kmax + 1;
  std::vector<std::int32_t> lattice(static_cast<std::size_t>(2 * jmax + 1) * cols, -1);
  auto core_xy = [&](int j, int k) { return Vec2{(k + ((j & 1) ? 0.5 : 0.0)) * s, j * row_h}; };
  for (int j = -jmax; j <= jmax; ++j) {
    for (int k = -kmax; k <= kmax; ++k) {
      const Vec2 c = core_xy(j, k);
      if (c.norm() <= reach) {
        lattice[static_cast<std::size_t>(j + jmax) * cols + (k + kmax)] = static_cast<std::int32_t>(cores_.size());
        cores_.push_back(c);
      }
    }
  }

  const double pitch = spec_.pixel_pitch_um();
  const double sigma_core = s / 2.5;
  pixel_core_.assign(static_cast<std::size_t>(n) * n, -1);
  pixel_weight_.assign(static_cast<std::size_t>(n) * n, 0.0f);
  mask_.assign(static_cast<std::size_t>(n) * n, 0);
  double weight_sum = 0.0;
  std::size_t weight_count = 0;
  const double half = 0.5 * n;
  for (int py = 0; py < n; ++py) {
    for (int px = 0; px < n; ++px) {
      const std::size_t idx = static_cast<std::size_t>(py) * n + px;
      const double dxp = px + 0.5 - half;
      const double dyp = py + 0.5 - half;
      mask_[idx] = (dxp * dxp + dyp * dyp <= half * half) ? 1 : 0;
      const Vec2 u{dxp * pitch, dyp * pitch};
      const int j0 = static_cast<int>(std::lround(u.y / row_h));
      double best = 1e300;
      std::int32_t best_idx = -1;
      for (int j = j0 - 1; j <= j0 + 1; ++j) {
        if (j < -jmax || j > jmax) {
          continue;
        }
        const double shift = (j & 1) ? 0.5 : 0.0;
        const int k = static_cast<int>(std::lround(u.x / s - shift));
        if (k < -kmax || k > kmax) {
          continue;
        }
        const std::int32_t ci = lattice[static_cast<std::size_t>(j + jmax) * cols + (k + kmax)];
        if (ci < 0) {
          continue;
        }
        const double d2 = (cores_[ci] - u).dot(cores_[ci] - u);
        if (d2 < best) {
          best = d2;
          best_idx = ci;
        }
      }
      if (best_idx >= 0) {
        pixel_core_[idx] = best_idx;
        const double w = std::exp(-0.5 * best / (sigma_core * sigma_core));
        pixel_weight_[idx] = static_cast<float>(w);
        if (mask_[idx]) {
          weight_sum += w;
          ++weight_count;
        }
      }
    }
  }
  // Flat-field normalisation: a uniform scene images to ~1 inside the mask.
  const double mean_w = weight_count ? weight_sum / static_cast<double>(weight_count) : 1.0;
  for (auto &w : pixel_weight_) {
    w = static_cast<float>(w / mean_w);
  }
}

Frame Endoscope::capture(const Scene &scene, const TipPose &tip, double t_s) const {
  const int n = spec_.frame_px;
  const Vec2 tip_um{tip.x_mm * 1000.0, tip.y_mm * 1000.0};
  const double rot = deg_to_rad(spec_.rotation_deg);

  Frame frame;
  frame.timestamp_s = t_s;
  frame.tip_at_capture = tip;

  std::vector<float> core_value(cores_.size());
  for (std::size_t i = 0; i < cores_.size(); ++i) {
    const SceneSample smp = scene.sample(tip_um + rotate_servo(cores_[i], rot));
    // Only cores inside the field stop can flag the frame.
    if (smp.out_of_field && cores_[i].norm() <= 0.5 * spec_.fov_diameter_um) {
      frame.out_of_field = true;
    }
    core_value[i] = static_cast<float>(smp.intensity);
  }

  Image img(n, n);
  auto px = img.data();
  for (std::size_t i = 0; i < px.size(); ++i) {
    const std::int32_t c = pixel_core_[i];
    px[i] = c >= 0 ? core_value[c] * pixel_weight_[i] : 0.0f;
  }

  if (spec_.noise_sigma > 0.0) {
    const auto k = static_cast<std::uint64_t>(std::llround(t_s * spec_.frame_rate_hz));
    Rng rng(spec_.noise_seed * 0x9E3779B97F4A7C15ULL + k);
    for (auto &v : px) {
      v += static_cast<float>(spec_.noise_sigma * rng.normal());
    }
  }

  gaussian_blur(img, pre_.gaussian_sigma_px);

  const auto *bg = pre_.background ? &*pre_.background : nullptr;
  for (std::size_t i = 0; i < px.size(); ++i) {
    float v = px[i];
    if (bg) {
      v = std::max(0.0f, v - bg->data()[i]);
    }
    px[i] = mask_[i] ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
  }
  frame.pixels = std::move(img);
  return frame;
}

double frame_time(const ProbeSpec &spec, std::size_t k) { return static_cast<double>(k) / spec.frame_rate_hz; }

std::vector<double> frame_clock(const ProbeSpec &spec, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    out[k] = frame_time(spec, k);
  }
  return out;
}

void write_frame_pgm(const std::filesystem::path &path, const Frame &frame) { write_pgm8(path, frame.pixels); }

void write_frame_metadata(std::ostream &out, const Frame &frame) {
  nlohmann::json j;
  j["timestamp_s"] = frame.timestamp_s;
  j["tip_mm"] = {frame.tip_at_capture.x_mm, frame.tip_at_capture.y_mm};
  j["out_of_field"] = frame.out_of_field;
  out << j.dump() << '\n';
}

} // namespace endoscan
