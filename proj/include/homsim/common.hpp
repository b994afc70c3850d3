#pragma once

// Shared numerics: errors, seeded RNG, log-domain helpers, circular statistics.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace homsim {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

using cd = std::complex<double>;

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class ToleranceError : public std::runtime_error {
 public:
  explicit ToleranceError(const std::string& what) : std::runtime_error(what) {}
};

class GridMismatchError : public std::runtime_error {
 public:
  explicit GridMismatchError(const std::string& what) : std::runtime_error(what) {}
};

// Deterministic RNG. All sampling in the library goes through uniform(),
// which uses the top 53 bits of mt19937_64 so streams are identical across
// platforms (std::uniform_real_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

inline double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

inline double log_binomial(int n, int k) {
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

inline double log_sum_exp(std::span<const double> vals) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : vals) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : vals) s += std::exp(v - m);
  return m + std::log(s);
}

inline double wrap_angle(double phi) {
  phi = std::fmod(phi, kTwoPi);
  if (phi < 0) phi += kTwoPi;
  return phi;
}

// Distance between two angles along the circle, in [0, pi].
inline double circular_distance(double a, double b) {
  double d = std::fabs(wrap_angle(a) - wrap_angle(b));
  return std::min(d, kTwoPi - d);
}

struct CircularStats {
  double mean = 0.0;        // direction of the first circular moment
  double resultant = 0.0;   // R = |first moment|, in [0, 1]
  double stddev = 0.0;      // sqrt(-2 ln R); infinite for R = 0
};

// weights[j] is a density w.r.t. dphi/2pi on the uniform grid phi_j = 2pi j / J.
inline CircularStats circular_stats(std::span<const double> weights) {
  const std::size_t J = weights.size();
  double zr = 0.0, zi = 0.0, tot = 0.0;
  for (std::size_t j = 0; j < J; ++j) {
    const double phi = kTwoPi * static_cast<double>(j) / static_cast<double>(J);
    zr += weights[j] * std::cos(phi);
    zi += weights[j] * std::sin(phi);
    tot += weights[j];
  }
  CircularStats out;
  if (tot <= 0.0) return out;
  const double r = std::hypot(zr, zi) / tot;
  out.mean = wrap_angle(std::atan2(zi, zr));
  out.resultant = r;
  out.stddev = r > 0.0 ? std::sqrt(std::max(0.0, -2.0 * std::log(r)))
                       : std::numeric_limits<double>::infinity();
  return out;
}

// Inverse-CDF draw from a discrete distribution given its cumulative sums.
// On an exact boundary hit the lower bin wins; zero-mass bins are skipped.
inline std::size_t sample_from_cdf(std::span<const double> cdf, double u) {
  const double target = u * cdf.back();
  std::size_t lo = 0, hi = cdf.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (cdf[mid] >= target)
      hi = mid;
    else
      lo = mid + 1;
  }
  // skip bins with zero mass (reachable only on exact boundary hits)
  while (lo + 1 < cdf.size() && cdf[lo] == (lo == 0 ? 0.0 : cdf[lo - 1])) ++lo;
  return lo;
}

}  // namespace homsim
