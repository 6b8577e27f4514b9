#pragma once

#include <cstdint>
#include <random>

namespace glmh {

// 64-bit finalizer from splitmix64; used to derive independent per-voxel
// streams from (global seed, voxel id) so that scheduling cannot change
// results.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Random source owned by a single chain. Copyable, so a copy replays the
// exact same stream.
class Random {
 public:
  explicit Random(std::uint64_t seed = 0) : engine_(seed) {}

  double gaussian() { return normal_(engine_); }

  // Uniform on [0, 1).
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  std::size_t uniform_index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

  double chi_square(double df) { return 2.0 * std::gamma_distribution<double>(0.5 * df, 1.0)(engine_); }

  double beta(double a, double b) {
    const double x = std::gamma_distribution<double>(a, 1.0)(engine_);
    const double y = std::gamma_distribution<double>(b, 1.0)(engine_);
    return x / (x + y);
  }

  bool operator==(const Random& other) const {
    return engine_ == other.engine_ && normal_ == other.normal_;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace glmh
