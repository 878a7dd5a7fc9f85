#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace zclip {

/// mt19937_64 with explicit bits-to-double conversions, so identical seeds
/// reproduce identical streams across standard libraries. std::*_distribution
/// is deliberately avoided (its output is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0,1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0,1]; safe as a log() argument.
  double uniform01_open() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller. One draw consumes two uniforms.
  double normal() {
    const double u = uniform01_open();
    const double v = uniform01();
    return std::sqrt(-2.0 * std::log(u)) *
           std::cos(2.0 * std::numbers::pi * v);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * bound) >> 64);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace zclip
