#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace endoscan {

// Row-major single-channel float image.
class Image {
public:
  Image() = default;
  Image(int width, int height, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  float &at(int x, int y) { return data_[index(x, y)]; }
  float at(int x, int y) const { return data_[index(x, y)]; }

  std::span<float> row(int y) { return {data_.data() + index(0, y), static_cast<std::size_t>(width_)}; }
  std::span<const float> row(int y) const {
    return {data_.data() + index(0, y), static_cast<std::size_t>(width_)};
  }
  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  // Bilinear lookup in pixel-centre coordinates (pixel (i, j) has centre (i, j)).
  // Returns false when the point is outside the image.
  bool bilinear(double x, double y, float &out) const;

  friend bool operator==(const Image &, const Image &) = default;

private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

// Separable Gaussian filter with clamped borders.
void gaussian_blur(Image &img, double sigma_px);

// 8-bit and 16-bit binary PGM. Values are mapped from [0, 1] and clamped.
void write_pgm8(const std::filesystem::path &path, const Image &img);
void write_pgm16(const std::filesystem::path &path, const Image &img);
// Reads P5 PGM of either depth, scaled to [0, 1].
Image read_pgm(const std::filesystem::path &path);

} // namespace endoscan
