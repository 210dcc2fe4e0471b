#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace tailhedge {

/// Deterministic counter-based random stream (splitmix64 core).
///
/// Streams are identified by a 64-bit key derived from a seed plus an
/// arbitrary list of labels, so independent substreams can be handed to
/// parallel workers: Rng(seed, {"path", i}) draws the same numbers no matter
/// how work is sharded. All draws are reproducible across platforms; nothing
/// here depends on implementation-defined <random> distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  /// Key derivation: fold labels into the seed with the splitmix64 finalizer.
  static std::uint64_t derive_key(std::uint64_t seed) { return mix(seed ^ 0x9e3779b97f4a7c15ull); }
  template <typename... Rest>
  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t label, Rest... rest) {
    return derive_key(mix(seed ^ mix(label + 0xbf58476d1ce4e5b9ull)), rest...);
  }

  template <typename... Labels>
  Rng substream(Labels... labels) const {
    return Rng(derive_key(key_, static_cast<std::uint64_t>(labels)...));
  }

  std::uint64_t next_u64() {
    std::uint64_t z = key_ + 0x9e3779b97f4a7c15ull * ++counter_;
    return mix(z);
  }

  /// Uniform in (0, 1), never exactly 0 or 1.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), n > 0. Lemire's multiply-shift method.
  std::uint64_t uniform_below(std::uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal via Box-Muller; draws are paired and cached.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace tailhedge
