#pragma once

#include "endoscan/image.hpp"
#include "endoscan/kinematics.hpp"
#include "endoscan/phantom.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

namespace endoscan {

struct ProbeSpec {
  double fov_diameter_um = 240.0;
  double resolution_um = 2.0;
  double core_spacing_um = 3.0;
  int core_count = 30000;
  double frame_rate_hz = 120.0;
  int frame_px = 256;
  // Rotation of the image axes relative to the actuator axes, in the
  // image-to-actuator convention. Set when the probe is loaded; unknown to the servo.
  double rotation_deg = 0.0;
  // Optional additive read noise (0 disables).
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;

  void validate() const;
  double pixel_pitch_um() const { return fov_diameter_um / frame_px; }
};

struct PreprocessParams {
  double gaussian_sigma_px = 1.4;
  // Darkfield frame to subtract; empty means zero background.
  std::optional<Image> background;
};

struct Frame {
  Image pixels;
  double timestamp_s = 0.0;
  // Ground truth, diagnostics only.
  TipPose tip_at_capture{};
  bool out_of_field = false;
};

// Fibre-bundle probe model: hex-packed cores sample the scene, each core is
// splatted onto the pixel raster with a Gaussian profile, then the frame goes
// through Gaussian smoothing, background subtraction and a circular mask.
class Endoscope {
public:
  explicit Endoscope(ProbeSpec spec, PreprocessParams pre = {});

  const ProbeSpec &spec() const { return spec_; }
  std::size_t core_sites() const { return cores_.size(); }

  Frame capture(const Scene &scene, const TipPose &tip, double t_s) const;

private:
  ProbeSpec spec_;
  PreprocessParams pre_;
  // Core offsets from the probe axis in image axes (um).
  std::vector<Vec2> cores_;
  // Per-pixel nearest core and normalised profile weight.
  std::vector<std::int32_t> pixel_core_;
  std::vector<float> pixel_weight_;
  std::vector<std::uint8_t> mask_;
};

// Capture time of frame k: k / frame_rate.
double frame_time(const ProbeSpec &spec, std::size_t k);
std::vector<double> frame_clock(const ProbeSpec &spec, std::size_t count);

void write_frame_pgm(const std::filesystem::path &path, const Frame &frame);
// One JSON object per line: timestamp, pose, flags.
void write_frame_metadata(std::ostream &out, const Frame &frame);

} // namespace endoscan
