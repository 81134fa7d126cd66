#pragma once

#include "endoscan/common.hpp"
#include "endoscan/image.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace endoscan {

struct GridSpec {
  double line_thickness_um = 73.0;
  double square_width_um = 237.0;

  double period_um() const { return line_thickness_um + square_width_um; }
  void validate() const;
};

struct AblationMark {
  Vec2 centre_um{};
  double mark_diameter_um = 104.0;
  double thermal_spread_um = 50.0;
};

struct SceneSample {
  double intensity = 0.0;
  bool out_of_field = false;
};

// Ground-truth tissue. The intensity field is fixed to the tissue; the tissue
// itself is displaced in the world by rigid_offset + deformation.
class Scene {
public:
  Scene() = default;
  // origin_um is the world position of the field's top-left pixel corner.
  Scene(Image field, double resolution_um_per_px, Vec2 origin_um);

  const Image &field() const { return field_; }
  double resolution_um_per_px() const { return resolution_; }
  Vec2 origin_um() const { return origin_; }
  // Half-extent of the largest centred square the field covers.
  double half_extent_um() const;

  Vec2 rigid_offset_um{};
  Vec2 deformation_um{};

  const std::vector<AblationMark> &marks() const { return marks_; }
  void apply_mark(const AblationMark &mark);

  // Tissue coordinate under a world point.
  Vec2 to_tissue(const Vec2 &world_um) const { return world_um - rigid_offset_um - deformation_um; }

  // Bilinear lookup at a world point, attenuated by ablation marks.
  SceneSample sample(const Vec2 &world_um) const;

private:
  Image field_;
  double resolution_ = 1.0;
  Vec2 origin_{};
  std::vector<AblationMark> marks_;
};

// Bright antialiased lines on dim, faintly textured squares. A line is centred on
// the world origin along both axes.
Scene make_grid(const GridSpec &spec, double extent_mm, std::uint64_t seed = 1, double resolution_um_per_px = 1.0);

// Band-limited random texture whose autocorrelation FWHM is feature_scale_um.
Scene make_texture(std::uint64_t seed, double extent_mm, double feature_scale_um,
                   double resolution_um_per_px = 1.0);

Scene make_uniform(double intensity, double extent_mm, double resolution_um_per_px = 1.0);

// Gaussian standard deviation that gives an autocorrelation FWHM of fwhm_um.
double texture_sigma_for_fwhm(double fwhm_um);

// Reflected constant-speed random walk of the tissue's rigid offset.
class DisturbanceModel {
public:
  DisturbanceModel(double amplitude_um, double speed_mm_per_s, std::uint64_t seed);

  double amplitude_um() const { return amplitude_; }
  double speed_mm_per_s() const { return speed_; }
  Vec2 offset_um() const { return offset_; }

  // Moves the offset by speed * dt in a random direction, reflecting at +/-amplitude per axis.
  Vec2 step(double dt_s);

private:
  double amplitude_;
  double speed_;
  Rng rng_;
  Vec2 offset_{};
};

// First-order tissue drag: the tissue follows a fraction of the probe's motion
// and relaxes back with an exponential time constant.
class DeformationModel {
public:
  DeformationModel(double drag_coefficient, double recovery_time_s);

  double drag_coefficient() const { return drag_; }
  double recovery_time_s() const { return recovery_; }
  Vec2 state_um() const { return state_; }

  Vec2 step(const Vec2 &probe_velocity_mm_per_s, double dt_s);

private:
  double drag_;
  double recovery_;
  Vec2 state_{};
};

// 16-bit PGM plus a JSON header carrying resolution and origin.
void save_scene(const Scene &scene, const std::filesystem::path &pgm_path, const std::filesystem::path &json_path);
Scene load_scene(const std::filesystem::path &json_path);

} // namespace endoscan
