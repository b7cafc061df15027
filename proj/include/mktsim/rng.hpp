#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mktsim {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Stream domains keep, e.g., the pool shuffle and step 1 from sharing a seed.
enum class StreamDomain : std::uint64_t {
  Pool = 1,
  Step = 2,
  Bootstrap = 3,
  Generator = 4,
};

/// Seed for sub-stream `index` of `domain` under run seed `seed`:
///
///   mix64(mix64(mix64(seed) ^ domain) + index)
///
/// Distinct (seed, domain, index) triples give unrelated engine seeds, so runs
/// with seeds s and s+1 never share stream state.
constexpr std::uint64_t derive_stream_seed(std::uint64_t seed, StreamDomain domain,
                                           std::uint64_t index) noexcept {
  return mix64(mix64(mix64(seed) ^ static_cast<std::uint64_t>(domain)) + index);
}

/// Portable random stream. The engine is std::mt19937_64, whose output sequence is
/// fixed by the standard; the distributions below are hand-rolled because the
/// standard library's are implementation-defined.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}
  RandomStream(std::uint64_t seed, StreamDomain domain, std::uint64_t index)
      : engine_(derive_stream_seed(seed, domain, index)) {}

  std::uint64_t next_u64() {
    ++draws_;
    return engine_();
  }

  /// Uniform on [0, 1) with 53 bits of resolution; one draw.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [0, n); one draw. n must be positive.
  std::uint64_t below(std::uint64_t n) {
    auto k = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller; two draws.
  double normal() {
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  std::uint64_t draws() const noexcept { return draws_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
};

}  // namespace mktsim
