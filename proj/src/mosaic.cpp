#include "endoscan/mosaic.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

namespace endoscan {

MosaicCanvas::MosaicCanvas(int size_px, double um_per_px, int frame_px, bool auto_grow)
    : pixels_(size_px, size_px), valid_(static_cast<std::size_t>(size_px) * size_px, 0), um_per_px_(um_per_px),
      frame_px_(frame_px), auto_grow_(auto_grow), origin_x_((size_px - frame_px) / 2),
      origin_y_((size_px - frame_px) / 2) {
  if (frame_px <= 0 || size_px < frame_px) {
    throw ConfigError("mosaic canvas must be at least one frame wide");
  }
  if (!(um_per_px > 0.0)) {
    throw ConfigError("mosaic scale must be positive");
  }
}

std::size_t MosaicCanvas::valid_count() const {
  return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), std::uint8_t{1}));
}

Vec2 MosaicCanvas::centre_px() const {
  return {static_cast<double>(origin_x_) + 0.5 * frame_px_, static_cast<double>(origin_y_) + 0.5 * frame_px_};
}

Vec2 MosaicCanvas::frame_centre_px(const PositionEstimate &at) const {
  return centre_px() + Vec2{static_cast<double>(at.x_px), static_cast<double>(at.y_px)};
}

void MosaicCanvas::grow_to_fit(long x0, long y0, long x1, long y1) {
  const long w = width();
  const long h = height();
  // Grow by at least a frame on the short side to amortise copies.
  const long pad_l = x0 < 0 ? -x0 + frame_px_ : 0;
  const long pad_t = y0 < 0 ? -y0 + frame_px_ : 0;
  const long pad_r = x1 > w ? x1 - w + frame_px_ : 0;
  const long pad_b = y1 > h ? y1 - h + frame_px_ : 0;
  const long nw = w + pad_l + pad_r;
  const long nh = h + pad_t + pad_b;
  Image grown(static_cast<int>(nw), static_cast<int>(nh));
  std::vector<std::uint8_t> valid(static_cast<std::size_t>(nw * nh), 0);
  for (long y = 0; y < h; ++y) {
    const auto src = pixels_.row(static_cast<int>(y));
    std::copy(src.begin(), src.end(), grown.row(static_cast<int>(y + pad_t)).begin() + pad_l);
    std::copy_n(valid_.begin() + y * w, w, valid.begin() + (y + pad_t) * nw + pad_l);
  }
  pixels_ = std::move(grown);
  valid_ = std::move(valid);
  origin_x_ += pad_l;
  origin_y_ += pad_t;
}

void MosaicCanvas::compose(const Image &working_frame, const PositionEstimate &at) {
  const int d = frame_px_;
  if (working_frame.width() != d || working_frame.height() != d) {
    throw Error("compose expects a frame at the canvas working size");
  }
  long x0 = origin_x_ + at.x_px;
  long y0 = origin_y_ + at.y_px;
  if (x0 < 0 || y0 < 0 || x0 + d > width() || y0 + d > height()) {
    if (!auto_grow_) {
      throw Error("frame placement falls outside the mosaic canvas");
    }
    grow_to_fit(x0, y0, x0 + d, y0 + d);
    x0 = origin_x_ + at.x_px;
    y0 = origin_y_ + at.y_px;
  }
  const double r2 = 0.25 * d * d;
  const int w = width();
  for (int y = 0; y < d; ++y) {
    const double dy = y + 0.5 - 0.5 * d;
    const auto src = working_frame.row(y);
    auto dst = pixels_.row(static_cast<int>(y0 + y));
    for (int x = 0; x < d; ++x) {
      const double dx = x + 0.5 - 0.5 * d;
      if (dx * dx + dy * dy <= r2) {
        dst[x0 + x] = src[x];
        valid_[static_cast<std::size_t>(y0 + y) * w + static_cast<std::size_t>(x0 + x)] = 1;
      }
    }
  }
}

Mosaicker::Mosaicker(RegistrationParams params, int canvas_px, double um_per_px, bool auto_grow, NccMethod method)
    : registrar_(params, method), canvas_(canvas_px, um_per_px, params.working_diameter_px, auto_grow) {}

Mosaicker::~Mosaicker() {
  if (pending_.valid()) {
    pending_.wait();
  }
}

void Mosaicker::flush() {
  if (pending_.valid()) {
    pending_.get();
  }
}

const MosaicCanvas &Mosaicker::canvas() {
  flush();
  return canvas_;
}

MosaicUpdate Mosaicker::add(const Image &frame) {
  const int d = registrar_.params().working_diameter_px;
  if (frame.width() != d && (!resizer_ || resizer_->in_px() != frame.width())) {
    resizer_.emplace(frame.width(), d);
  }
  Image working = frame.width() == d ? frame : (*resizer_)(frame);

  MosaicUpdate up;
  if (frames_ == 0) {
    registrar_.set_reference(working);
  } else if (registrar_.reference_degenerate()) {
    // Nothing to match against; restart from this frame and keep the estimate.
    registrar_.set_reference(working);
    ++frames_;
    ++failures_;
    trajectory_.push_back(position_);
    up.failed = true;
    up.position = position_;
    return up;
  } else {
    try {
      up.result = registrar_.match(working);
    } catch (const RegistrationError &) {
      ++frames_;
      ++failures_;
      trajectory_.push_back(position_);
      up.failed = true;
      up.position = position_;
      return up;
    }
    up.registered = true;
    position_ = integrate(position_, up.result);
    registrar_.set_reference(working);
  }
  ++frames_;
  trajectory_.push_back(position_);
  up.position = position_;

  // Compositing of this frame overlaps registration of the next one.
  flush();
  pending_ = std::async(std::launch::async, [this, img = std::move(working), at = position_]() {
    canvas_.compose(img, at);
  });
  return up;
}

void save_mosaic(const MosaicCanvas &canvas, const std::vector<PositionEstimate> &trajectory,
                 const std::filesystem::path &pgm_path, const std::filesystem::path &json_path) {
  int x0 = canvas.width();
  int y0 = canvas.height();
  int x1 = -1;
  int y1 = -1;
  for (int y = 0; y < canvas.height(); ++y) {
    for (int x = 0; x < canvas.width(); ++x) {
      if (canvas.valid_at(x, y)) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0) {
    throw Error("cannot export an empty mosaic");
  }
  Image crop(x1 - x0 + 1, y1 - y0 + 1);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      crop.at(x - x0, y - y0) = canvas.valid_at(x, y) ? canvas.pixels().at(x, y) : 0.0f;
    }
  }
  write_pgm8(pgm_path, crop);

  nlohmann::json j;
  j["image"] = pgm_path.filename().string();
  j["um_per_px"] = canvas.um_per_px();
  j["width_px"] = crop.width();
  j["height_px"] = crop.height();
  const Vec2 c = canvas.centre_px();
  j["centre_px"] = {c.x - x0, c.y - y0};
  nlohmann::json traj = nlohmann::json::array();
  for (const auto &p : trajectory) {
    traj.push_back({p.x_px, p.y_px});
  }
  j["trajectory_px"] = traj;
  std::ofstream out(json_path);
  if (!out) {
    throw Error("cannot write " + json_path.string());
  }
  out << j.dump() << '\n';
}

} // namespace endoscan
