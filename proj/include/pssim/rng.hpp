#pragma once

#include <cmath>
#include <cstdint>

namespace pssim {

// SplitMix64 (Steele, Lea, Flood 2014). Chosen as the project-wide PRNG
// because its output is a pure function of (seed, call index), which makes
// shuffles and synthetic datasets reproducible across platforms and builds.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform double in the open interval (0, 1): ((bits >> 11) + 0.5) * 2^-53.
  double next_unit() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound). bound must be nonzero. Plain modulo;
  // the bias is negligible for the dataset sizes involved and keeping the
  // reduction trivial makes the shuffle algorithm easy to re-implement.
  std::uint64_t next_below(std::uint64_t bound) { return next() % bound; }

 private:
  std::uint64_t state_;
};

// Derives an independent stream seed from (seed, stream). Used to split one
// master seed into dataset / shuffle / per-worker streams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 rng(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
  return rng.next();
}

// Standard normal draws via the Box-Muller transform over SplitMix64.
// Pairs are consumed in a fixed order so output depends only on the seed.
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = rng_.next_unit();
    const double u2 = rng_.next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  SplitMix64 rng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pssim
