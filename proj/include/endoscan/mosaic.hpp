#pragma once

#include "endoscan/image.hpp"
#include "endoscan/phantom.hpp"

#include <cstdint>
#include <filesystem>
#include <future>
#include <memory>
#include <optional>
#include <vector>

namespace endoscan {

struct RegistrationParams {
  int working_diameter_px = 200;
  int template_px = 75;

  void validate() const;
  // Top-left corner of the central template inside a working image.
  int template_origin() const { return (working_diameter_px - template_px) / 2; }
};

// Probe motion between two frames, in working-scale image pixels: content at p
// in the earlier frame appears at p - shift in the later one.
struct Shift {
  int dx = 0;
  int dy = 0;
  friend constexpr bool operator==(const Shift &, const Shift &) = default;
};

struct RegistrationResult {
  Shift shift;
  double peak = 0.0;
};

// Integrated probe position in mosaic pixels; (0, 0) is the mosaic centre.
struct PositionEstimate {
  long x_px = 0;
  long y_px = 0;
  friend constexpr bool operator==(const PositionEstimate &, const PositionEstimate &) = default;
};

enum class NccMethod {
  Fft,
  // Direct per-placement evaluation; reference route for the FFT path.
  Spatial,
};

// Area-averaging resize of a square image to out_px x out_px.
Image resize_area(const Image &src, int out_px);

// Area resize of a frame with a circular field stop. Output pixels are divided
// by the fraction of their footprint inside the input disc, so the rim keeps
// its brightness instead of being averaged with the masked-out corners.
class DiscResizer {
public:
  DiscResizer(int in_px, int out_px);
  int in_px() const { return in_px_; }
  int out_px() const { return out_px_; }
  Image operator()(const Image &src) const;

private:
  int in_px_;
  int out_px_;
  std::vector<float> inv_coverage_;
};

// Normalised cross-correlation of a central template against every placement
// in the next image, over the pixels that fall inside the next image's
// inscribed field disc. Argmax ties (within 1e-9) go to the smallest |shift|, then
// the smallest dy, then the smallest dx.
class NccRegistrar {
public:
  explicit NccRegistrar(RegistrationParams params, NccMethod method = NccMethod::Fft);
  ~NccRegistrar();
  NccRegistrar(NccRegistrar &&) noexcept;
  NccRegistrar &operator=(NccRegistrar &&) noexcept;

  const RegistrationParams &params() const { return params_; }

  // Extracts the template from a working-size image.
  void set_reference(const Image &working);
  bool has_reference() const;
  bool reference_degenerate() const;

  // Throws RegistrationError on a flat template or when nothing correlates.
  RegistrationResult match(const Image &working) const;

private:
  struct Impl;
  RegistrationParams params_;
  NccMethod method_;
  std::unique_ptr<Impl> impl_;
};

// Resizes both frames to the working diameter when needed, then registers.
RegistrationResult register_frames(const Image &prev, const Image &next, const RegistrationParams &params,
                                   NccMethod method = NccMethod::Fft);

PositionEstimate integrate(PositionEstimate est, const RegistrationResult &r);

// Dead-leaf canvas at the working scale. Frame pixels inside the circular field
// overwrite whatever is underneath.
class MosaicCanvas {
public:
  MosaicCanvas(int size_px, double um_per_px, int frame_px, bool auto_grow = false);

  int width() const { return pixels_.width(); }
  int height() const { return pixels_.height(); }
  double um_per_px() const { return um_per_px_; }
  int frame_px() const { return frame_px_; }
  const Image &pixels() const { return pixels_; }
  const std::vector<std::uint8_t> &valid() const { return valid_; }
  bool valid_at(int x, int y) const { return valid_[static_cast<std::size_t>(y) * width() + x] != 0; }
  std::size_t valid_count() const;
  bool empty() const { return valid_count() == 0; }

  // Canvas position (pixel-edge coordinates) of the mosaic centre p_Ic.
  Vec2 centre_px() const;
  // Canvas position of an estimate's frame centre.
  Vec2 frame_centre_px(const PositionEstimate &at) const;

  void compose(const Image &working_frame, const PositionEstimate &at);

private:
  void grow_to_fit(long x0, long y0, long x1, long y1);

  Image pixels_;
  std::vector<std::uint8_t> valid_;
  double um_per_px_;
  int frame_px_;
  bool auto_grow_;
  // Canvas pixel of the frame's top-left corner when p_I = (0, 0).
  long origin_x_;
  long origin_y_;
};

struct MosaicUpdate {
  bool registered = false;
  bool failed = false;
  RegistrationResult result;
  PositionEstimate position;
};

// Frame-to-frame registration, shift integration and compositing. Compositing
// of frame k runs on a worker while frame k+1 is registered; positions are
// updated strictly in frame order.
class Mosaicker {
public:
  Mosaicker(RegistrationParams params, int canvas_px, double um_per_px, bool auto_grow = false,
            NccMethod method = NccMethod::Fft);
  ~Mosaicker();
  Mosaicker(const Mosaicker &) = delete;
  Mosaicker &operator=(const Mosaicker &) = delete;

  MosaicUpdate add(const Image &frame);

  PositionEstimate position() const { return position_; }
  const std::vector<PositionEstimate> &trajectory() const { return trajectory_; }
  std::size_t frames() const { return frames_; }
  std::size_t failures() const { return failures_; }
  const RegistrationParams &params() const { return registrar_.params(); }

  // Waits for outstanding compositing.
  const MosaicCanvas &canvas();

private:
  void flush();

  NccRegistrar registrar_;
  std::optional<DiscResizer> resizer_;
  MosaicCanvas canvas_;
  std::future<void> pending_;
  PositionEstimate position_;
  std::vector<PositionEstimate> trajectory_;
  std::size_t frames_ = 0;
  std::size_t failures_ = 0;
};

// Exports the valid bounding box as 8-bit PGM and a JSON sidecar with the
// scale, the mosaic centre inside the exported image and the p_I trajectory.
void save_mosaic(const MosaicCanvas &canvas, const std::vector<PositionEstimate> &trajectory,
                 const std::filesystem::path &pgm_path, const std::filesystem::path &json_path);

// ---- measurement tools ----

// Max caliper of the valid region (pixel extents), in mm.
double measure_mosaic_diameter_mm(const MosaicCanvas &canvas);

struct GridMeasurement {
  double thickness_mean_um = 0.0;
  double thickness_sd_um = 0.0;
  std::size_t thickness_count = 0;
  double width_mean_um = 0.0;
  double width_sd_um = 0.0;
  std::size_t width_count = 0;
};

// Profile measurements across line crossings along rows and columns. The
// expected spec only gates which runs count as lines or squares.
GridMeasurement measure_grid(const Image &img, const std::vector<std::uint8_t> *valid, double um_per_px,
                             const GridSpec &expected, std::size_t min_crossings = 22);
GridMeasurement measure_grid(const MosaicCanvas &canvas, const GridSpec &expected, std::size_t min_crossings = 22);

struct DarkDisc {
  Vec2 centroid_px{};
  double area_px = 0.0;
  double diameter_um = 0.0;
};

// Connected region of valid pixels below threshold closest to near_px.
std::optional<DarkDisc> measure_dark_disc(const MosaicCanvas &canvas, Vec2 near_px, double threshold = 0.02,
                                          double search_radius_px = 60.0);

} // namespace endoscan
