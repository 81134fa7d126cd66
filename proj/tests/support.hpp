#pragma once

#include <cstdint>
#include <random>

namespace testsupport {

// Minimal generator for property tests.
class Gen {
public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(eng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(eng_); }
  std::uint64_t seed() { return eng_(); }

private:
  std::mt19937_64 eng_;
};

// Runs prop(gen, case_index) for n cases from a fixed seed.
template <typename Prop> void for_all(int n, std::uint64_t seed, Prop prop) {
  Gen gen(seed);
  for (int i = 0; i < n; ++i) {
    prop(gen, i);
  }
}

} // namespace testsupport
