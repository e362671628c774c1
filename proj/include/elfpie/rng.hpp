#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace elfpie::sim {

// SplitMix64 finalizer; used to derive decorrelated substream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Keyed random stream: the engine state is a pure function of (seed, key),
// so draws never depend on which thread consumes the stream.
class RngStream {
 public:
  static constexpr std::string_view kAlgorithm = "splitmix64-keyed mt19937_64";

  RngStream(std::uint64_t seed, std::uint64_t key)
      : seed_(seed), engine_(splitmix64(splitmix64(seed) ^ splitmix64(key + 0x632BE59BD9B4E019ULL))) {}

  std::uint64_t seed() const { return seed_; }

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  long long poisson(double mean) {
    if (mean <= 0.0) return 0;
    return std::poisson_distribution<long long>(mean)(engine_);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

// Stream keys. Per-image streams are spaced so purposes never collide.
inline std::uint64_t image_key(std::size_t image, std::uint64_t purpose) {
  return static_cast<std::uint64_t>(image) * 16 + purpose;
}
inline constexpr std::uint64_t kIlluminationPurpose = 1;
inline constexpr std::uint64_t kNoisePurpose = 2;
inline constexpr std::uint64_t kLedShiftKey = 0xFFFF'FFFF'0000'0001ULL;

}  // namespace elfpie::sim
