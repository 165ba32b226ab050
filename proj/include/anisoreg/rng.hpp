#pragma once

#include <cmath>
#include <cstdint>

namespace anisoreg {

// Derivation tags keeping the streams of one replicate disjoint by use.
enum class StreamPurpose : std::uint64_t {
  design = 1,
  pilot = 2,
  moments = 3,
  instance = 4,
  aux = 5,
};

namespace detail {

inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

}  // namespace detail

// Counter-based stream: a splitmix64 walk keyed by (seed, replicate, purpose).
// A stream is a value type fully determined by its key, so replicates may be
// generated on any thread in any order and still produce bit-identical draws.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t replicate, StreamPurpose purpose)
      : state_(derive_key(seed, replicate, static_cast<std::uint64_t>(purpose))) {}

  std::uint64_t next_u64() {
    state_ += detail::kGamma;
    return detail::mix64(state_);
  }

  // Uniform on (0,1); endpoints are never returned.
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via the polar method; the spare deviate is cached.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_unit() - 1.0;
      v = 2.0 * next_unit() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s <= 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

 private:
  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t replicate,
                                  std::uint64_t purpose) {
    std::uint64_t k = detail::mix64(seed ^ 0x8BB84B93962EACC9ull);
    k = detail::mix64(k ^ (replicate * 0xD1342543DE82EF95ull + 0x2545F4914F6CDD1Dull));
    k = detail::mix64(k ^ (purpose * 0xDA942042E4DD58B5ull + 0xA0761D6478BD642Full));
    return k;
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace anisoreg
