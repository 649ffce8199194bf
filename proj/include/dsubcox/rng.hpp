#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dsubcox {

// Inverse standard normal CDF (Acklam's rational approximation, relative
// error below 1.2e-9 over (0,1)). Throws std::invalid_argument outside (0,1).
double inverse_normal_cdf(double p);

// Standard normal CDF, used by goodness-of-fit checks.
double normal_cdf(double x);

/// Deterministic random stream. Wraps mt19937_64; all variate mappings are
/// implemented here (inverse-CDF based) so that a seed fully determines the
/// byte-level output on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // uniform on [0,1), 53-bit resolution
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // uniform on (0,1); never returns an endpoint
  double uniform_pos() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return inverse_normal_cdf(uniform_pos()); }

  double exponential();  // rate 1

  // integer in [0, n)
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

// Splittable seeding: folds a path of counters into a master seed so that
// streams for (replicate, site, purpose...) are independent and
// order-insensitive. SplitMix64 finalizer per component.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

inline Rng derive_stream(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(master, path));
}

// Stream purpose tags; keeping them in one place avoids accidental overlap.
namespace stream {
inline constexpr std::uint64_t kDataset = 0xD5;
inline constexpr std::uint64_t kSampling = 0x5A;
inline constexpr std::uint64_t kCalibration = 0xCA;
inline constexpr std::uint64_t kOptimal = 0x09;
inline constexpr std::uint64_t kUniform = 0x0A;
}  // namespace stream

}  // namespace dsubcox
