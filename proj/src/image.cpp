#include "endoscan/image.hpp"

#include "endoscan/common.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace endoscan {

Image::Image(int width, int height, float fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0)), fill) {
  if (width < 0 || height < 0) {
    throw Error("image dimensions must be non-negative");
  }
}

bool Image::bilinear(double x, double y, float &out) const {
  if (empty() || x < 0.0 || y < 0.0 || x > width_ - 1 || y > height_ - 1) {
    out = 0.0f;
    return false;
  }
  const int x0 = std::min(static_cast<int>(x), width_ - 1);
  const int y0 = std::min(static_cast<int>(y), height_ - 1);
  const int x1 = std::min(x0 + 1, width_ - 1);
  const int y1 = std::min(y0 + 1, height_ - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
  const double bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
  out = static_cast<float>(top * (1.0 - fy) + bottom * fy);
  return true;
}

void gaussian_blur(Image &img, double sigma_px) {
  if (sigma_px <= 0.0 || img.empty()) {
    return;
  }
  const int radius = static_cast<int>(std::ceil(3.0 * sigma_px));
  std::vector<float> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma_px * sigma_px));
    kernel[i + radius] = static_cast<float>(v);
    sum += v;
  }
  for (auto &k : kernel) {
    k = static_cast<float>(k / sum);
  }

  const int w = img.width();
  const int h = img.height();
  std::vector<float> line(static_cast<std::size_t>(std::max(w, h) + 2 * radius));

  for (int y = 0; y < h; ++y) {
    auto row = img.row(y);
    for (int i = 0; i < w + 2 * radius; ++i) {
      line[i] = row[std::clamp(i - radius, 0, w - 1)];
    }
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int k = 0; k <= 2 * radius; ++k) {
        acc += kernel[k] * line[x + k];
      }
      row[x] = acc;
    }
  }
  for (int x = 0; x < w; ++x) {
    for (int i = 0; i < h + 2 * radius; ++i) {
      line[i] = img.at(x, std::clamp(i - radius, 0, h - 1));
    }
    for (int y = 0; y < h; ++y) {
      float acc = 0.0f;
      for (int k = 0; k <= 2 * radius; ++k) {
        acc += kernel[k] * line[y + k];
      }
      img.at(x, y) = acc;
    }
  }
}

namespace {

void write_pgm(const std::filesystem::path &path, const Image &img, int maxval) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot open " + path.string() + " for writing");
  }
  out << "P5\n" << img.width() << ' ' << img.height() << '\n' << maxval << '\n';
  for (const float v : img.data()) {
    const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0f, 1.0f) * maxval));
    if (maxval > 255) {
      out.put(static_cast<char>(q >> 8));
    }
    out.put(static_cast<char>(q & 0xFF));
  }
}

std::string next_token(std::istream &in) {
  std::string tok;
  while (in >> tok) {
    if (tok[0] == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    return tok;
  }
  throw Error("truncated PGM header");
}

} // namespace

void write_pgm8(const std::filesystem::path &path, const Image &img) { write_pgm(path, img, 255); }

void write_pgm16(const std::filesystem::path &path, const Image &img) { write_pgm(path, img, 65535); }

Image read_pgm(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open " + path.string());
  }
  if (next_token(in) != "P5") {
    throw Error(path.string() + ": not a binary PGM");
  }
  const int w = std::stoi(next_token(in));
  const int h = std::stoi(next_token(in));
  const int maxval = std::stoi(next_token(in));
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    throw Error(path.string() + ": bad PGM header");
  }
  in.get();
  Image img(w, h);
  auto data = img.data();
  for (auto &v : data) {
    unsigned q = static_cast<unsigned char>(in.get());
    if (maxval > 255) {
      q = (q << 8) | static_cast<unsigned char>(in.get());
    }
    v = static_cast<float>(q) / static_cast<float>(maxval);
  }
  if (!in) {
    throw Error(path.string() + ": truncated PGM data");
  }
  return img;
}

} // namespace endoscan
