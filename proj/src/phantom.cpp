#include "endoscan/phantom.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace endoscan {

void GridSpec::validate() const {
  if (!(line_thickness_um > 0.0) || !(square_width_um > 0.0)) {
    throw ConfigError("grid line thickness and square width must be positive");
  }
}

Scene::Scene(Image field, double resolution_um_per_px, Vec2 origin_um)
    : field_(std::move(field)), resolution_(resolution_um_per_px), origin_(origin_um) {
  if (!(resolution_ > 0.0)) {
    throw ConfigError("scene resolution must be positive");
  }
}

double Scene::half_extent_um() const {
  const double x0 = -origin_.x;
  const double y0 = -origin_.y;
  const double x1 = origin_.x + field_.width() * resolution_;
  const double y1 = origin_.y + field_.height() * resolution_;
  return std::min({x0, y0, x1, y1});
}

void Scene::apply_mark(const AblationMark &mark) {
  if (!(mark.mark_diameter_um > 0.0) || mark.thermal_spread_um < 0.0) {
    throw ConfigError("ablation mark needs a positive diameter and non-negative spread");
  }
  marks_.push_back(mark);
}

SceneSample Scene::sample(const Vec2 &world_um) const {
  const Vec2 tissue = to_tissue(world_um);
  const double px = (tissue.x - origin_.x) / resolution_ - 0.5;
  const double py = (tissue.y - origin_.y) / resolution_ - 0.5;
  float value = 0.0f;
  if (!field_.bilinear(px, py, value)) {
    return {0.0, true};
  }
  double intensity = value;
  for (const auto &m : marks_) {
    const double d = (tissue - m.centre_um).norm();
    const double r = 0.5 * m.mark_diameter_um;
    if (d <= r) {
      return {0.0, false};
    }
    if (d < r + m.thermal_spread_um) {
      intensity *= (d - r) / m.thermal_spread_um;
    }
  }
  return {intensity, false};
}

namespace {

int field_pixels(double extent_mm, double res) {
  const int n = static_cast<int>(std::ceil(extent_mm * 1000.0 / res));
  if (n <= 0) {
    throw ConfigError("scene extent must be positive");
  }
  return n;
}

// Zero-mean unit-variance Gaussian-filtered white noise.
Image band_limited_noise(std::uint64_t seed, int n, double sigma_px) {
  Rng rng(seed);
  Image img(n, n);
  for (auto &v : img.data()) {
    v = static_cast<float>(rng.normal());
  }
  gaussian_blur(img, sigma_px);
  double sum = 0.0;
  double sum2 = 0.0;
  for (const float v : img.data()) {
    sum += v;
    sum2 += static_cast<double>(v) * v;
  }
  const double count = static_cast<double>(img.size());
  const double mean = sum / count;
  const double sd = std::sqrt(std::max(sum2 / count - mean * mean, 1e-30));
  for (auto &v : img.data()) {
    v = static_cast<float>((v - mean) / sd);
  }
  return img;
}

// Fraction of [a, b) covered by lines of width t centred on multiples of period p.
double line_coverage(double a, double b, double t, double p) {
  const double mid = 0.5 * (a + b);
  const long k0 = std::lround(mid / p);
  double covered = 0.0;
  for (long k = k0 - 1; k <= k0 + 1; ++k) {
    const double lo = std::max(a, k * p - 0.5 * t);
    const double hi = std::min(b, k * p + 0.5 * t);
    covered += std::max(0.0, hi - lo);
  }
  return std::min(1.0, covered / (b - a));
}

} // namespace

double texture_sigma_for_fwhm(double fwhm_um) {
  // Filtering white noise with sigma gives a Gaussian autocorrelation of
  // width sigma * sqrt(2); FWHM = 2 sqrt(2 ln 2) * sqrt(2) * sigma.
  return fwhm_um / (2.0 * std::sqrt(2.0 * std::log(2.0)) * std::sqrt(2.0));
}

Scene make_grid(const GridSpec &spec, double extent_mm, std::uint64_t seed, double res) {
  spec.validate();
  const int n = field_pixels(extent_mm, res);
  const Vec2 origin{-0.5 * n * res, -0.5 * n * res};

  std::vector<double> cov(n);
  for (int i = 0; i < n; ++i) {
    const double a = origin.x + i * res;
    cov[i] = line_coverage(a, a + res, spec.line_thickness_um, spec.period_um());
  }

  // Dim paper-like texture in the squares so registration has structure there.
  Image bg = band_limited_noise(seed, n, texture_sigma_for_fwhm(10.0) / res);
  Image field(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double c = 1.0 - (1.0 - cov[x]) * (1.0 - cov[y]);
      const double dim = std::clamp(0.2 + 0.06 * bg.at(x, y), 0.05, 0.4);
      field.at(x, y) = static_cast<float>(c * 1.0 + (1.0 - c) * dim);
    }
  }
  return Scene(std::move(field), res, origin);
}

Scene make_texture(std::uint64_t seed, double extent_mm, double feature_scale_um, double res) {
  if (!(feature_scale_um > 0.0)) {
    throw ConfigError("texture feature scale must be positive");
  }
  const int n = field_pixels(extent_mm, res);
  Image field = band_limited_noise(seed, n, texture_sigma_for_fwhm(feature_scale_um) / res);
  for (auto &v : field.data()) {
    v = std::clamp(0.55f + 0.18f * v, 0.1f, 1.0f);
  }
  return Scene(std::move(field), res, {-0.5 * n * res, -0.5 * n * res});
}

Scene make_uniform(double intensity, double extent_mm, double res) {
  const int n = field_pixels(extent_mm, res);
  return Scene(Image(n, n, static_cast<float>(std::clamp(intensity, 0.0, 1.0))), res,
               {-0.5 * n * res, -0.5 * n * res});
}

DisturbanceModel::DisturbanceModel(double amplitude_um, double speed_mm_per_s, std::uint64_t seed)
    : amplitude_(amplitude_um), speed_(speed_mm_per_s), rng_(seed) {
  if (!(amplitude_um >= 0.0) || !(speed_mm_per_s >= 0.0)) {
    throw ConfigError("disturbance amplitude and speed must be non-negative");
  }
}

Vec2 DisturbanceModel::step(double dt_s) {
  if (!(dt_s > 0.0)) {
    throw ConfigError("disturbance step needs dt > 0");
  }
  if (speed_ == 0.0) {
    return offset_;
  }
  const double len = speed_ * 1000.0 * dt_s;
  const double heading = 2.0 * kPi * rng_.uniform();
  Vec2 d{len * std::cos(heading), len * std::sin(heading)};
  // Specular reflection of the step keeps its length exact.
  if (std::abs(offset_.x + d.x) > amplitude_) {
    d.x = -d.x;
  }
  if (std::abs(offset_.y + d.y) > amplitude_) {
    d.y = -d.y;
  }
  offset_ += d;
  offset_.x = std::clamp(offset_.x, -amplitude_, amplitude_);
  offset_.y = std::clamp(offset_.y, -amplitude_, amplitude_);
  return offset_;
}

DeformationModel::DeformationModel(double drag_coefficient, double recovery_time_s)
    : drag_(drag_coefficient), recovery_(recovery_time_s) {
  if (!(drag_coefficient >= 0.0 && drag_coefficient < 1.0)) {
    throw ConfigError("drag coefficient must lie in [0, 1)");
  }
  if (!(recovery_time_s > 0.0)) {
    throw ConfigError("recovery time must be positive");
  }
}

Vec2 DeformationModel::step(const Vec2 &probe_velocity_mm_per_s, double dt_s) {
  if (!(dt_s > 0.0)) {
    throw ConfigError("deformation step needs dt > 0");
  }
  state_ += probe_velocity_mm_per_s * (drag_ * 1000.0 * dt_s);
  state_ *= std::exp(-dt_s / recovery_);
  return state_;
}

void save_scene(const Scene &scene, const std::filesystem::path &pgm_path, const std::filesystem::path &json_path) {
  write_pgm16(pgm_path, scene.field());
  nlohmann::json header;
  header["format"] = "endoscan-scene";
  header["version"] = 1;
  header["image"] = pgm_path.filename().string();
  header["width_px"] = scene.field().width();
  header["height_px"] = scene.field().height();
  header["resolution_um_per_px"] = scene.resolution_um_per_px();
  header["origin_um"] = {scene.origin_um().x, scene.origin_um().y};
  nlohmann::json marks = nlohmann::json::array();
  for (const auto &m : scene.marks()) {
    marks.push_back({{"centre_um", {m.centre_um.x, m.centre_um.y}},
                     {"mark_diameter_um", m.mark_diameter_um},
                     {"thermal_spread_um", m.thermal_spread_um}});
  }
  header["marks"] = marks;
  std::ofstream out(json_path);
  if (!out) {
    throw Error("cannot write " + json_path.string());
  }
  out << header.dump(2) << '\n';
}

Scene load_scene(const std::filesystem::path &json_path) {
  std::ifstream in(json_path);
  if (!in) {
    throw Error("cannot open " + json_path.string());
  }
  const auto header = nlohmann::json::parse(in);
  if (header.value("format", "") != "endoscan-scene") {
    throw ConfigError(json_path.string() + ": not a scene header");
  }
  const auto dir = json_path.parent_path();
  Image field = read_pgm(dir / header.at("image").get<std::string>());
  Scene scene(std::move(field), header.at("resolution_um_per_px").get<double>(),
              {header.at("origin_um").at(0).get<double>(), header.at("origin_um").at(1).get<double>()});
  for (const auto &m : header.value("marks", nlohmann::json::array())) {
    scene.apply_mark({{m.at("centre_um").at(0).get<double>(), m.at("centre_um").at(1).get<double>()},
                      m.at("mark_diameter_um").get<double>(),
                      m.at("thermal_spread_um").get<double>()});
  }
  return scene;
}

} // namespace endoscan
