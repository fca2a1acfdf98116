#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <string_view>

namespace irsce {

// mt19937_64 with hand-rolled variate transforms so that streams are
// reproducible across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, one fresh pair per call pair
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // circular complex Gaussian CN(0, 1)
  std::complex<double> cnormal() {
    const double s = 0.70710678118654752440084436210485;
    const double re = normal();
    const double im = normal();
    return {s * re, s * im};
  }

  // integer in [0, n)
  std::uint64_t index(std::uint64_t n) {
    // rejection to avoid modulo bias
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Derives independent substream seeds from (seed, tag, index) so that e.g.
// per-symbol phase draws do not shift when the symbol count changes.
inline std::uint64_t substream(std::uint64_t seed, std::string_view tag,
                               std::uint64_t index = 0) {
  std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 31;
  };
  for (char c : tag) mix(static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
  mix(index);
  mix(0xd6e8feb86659fd93ULL);
  return h;
}

}  // namespace irsce
