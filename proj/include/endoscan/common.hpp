#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace endoscan {

// Plain 2-D vector. Units are carried by the name of the variable that holds it.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 &operator+=(const Vec2 &o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2 &operator-=(const Vec2 &o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Vec2 &operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  double norm() const { return std::hypot(x, y); }
  constexpr double dot(const Vec2 &o) const { return x * o.x + y * o.y; }
  friend constexpr Vec2 operator+(Vec2 a, const Vec2 &b) { return a += b; }
  friend constexpr Vec2 operator-(Vec2 a, const Vec2 &b) { return a -= b; }
  friend constexpr Vec2 operator-(const Vec2 &a) { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
  friend constexpr bool operator==(const Vec2 &, const Vec2 &) = default;
};

inline constexpr double kPi = std::numbers::pi;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// Rotation in the image-to-actuator convention: [cos sin; -sin cos].
inline Vec2 rotate_servo(const Vec2 &v, double phi_rad) {
  const double c = std::cos(phi_rad);
  const double s = std::sin(phi_rad);
  return {c * v.x + s * v.y, -s * v.x + c * v.y};
}

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Drive voltage outside the configured range.
class RangeError : public Error {
public:
  RangeError(int axis, const std::string &what) : Error(what), axis_(axis) {}
  int axis() const { return axis_; }

private:
  int axis_;
};

class GeometryError : public Error {
public:
  using Error::Error;
};

class WorkspaceError : public Error {
public:
  using Error::Error;
};

class PlanError : public Error {
public:
  PlanError(std::size_t index, const std::string &what) : Error(what), index_(index) {}
  std::size_t index() const { return index_; }

private:
  std::size_t index_;
};

class RegistrationError : public Error {
public:
  using Error::Error;
};

class CalibrationError : public Error {
public:
  using Error::Error;
};

class InterlockError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

// Deterministic PRNG helpers. The standard distributions are implementation
// defined, so the mapping from raw 64-bit output to doubles is done here.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // splitmix64
  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Box-Muller; one draw per call, the pair partner is discarded.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) {
      u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

private:
  std::uint64_t state_;
};

} // namespace endoscan
