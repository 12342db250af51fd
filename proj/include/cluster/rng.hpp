#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cluster/errors.hpp"

namespace cluster {

// SplitMix64 step. Used as a splittable seed sequence: stream member i of a
// base seed is the i-th output. Never used as the sampling engine itself.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed for stream member `index` of `base_seed` (index fixed jumps ahead).
inline std::uint64_t stream_seed(std::uint64_t base_seed, std::uint64_t index) {
  std::uint64_t state = base_seed;
  std::uint64_t out = splitmix64_next(state);
  for (std::uint64_t i = 0; i < index; ++i) out = splitmix64_next(state);
  return out;
}

// Deterministic variate source. All transformations from engine output to
// variates are implemented here so that identical seeds give identical
// streams on every platform; the standard <random> distributions do not
// guarantee that.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1); never returns an endpoint.
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer uniform on [0, n) by rejection; unbiased for any n >= 1.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw DomainError("uniform_index: n must be positive");
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Bernoulli counting: exact and portable, O(n) draws.
  std::uint64_t binomial(std::uint64_t n, double p) {
    if (p < 0.0 || p > 1.0) throw DomainError("binomial: p must lie in [0, 1]");
    if (p == 0.0) return 0;
    if (p == 1.0) return n;
    std::uint64_t count = 0;
    for (std::uint64_t i = 0; i < n; ++i) count += bernoulli(p) ? 1 : 0;
    return count;
  }

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double half_normal(double scale) { return std::abs(normal()) * scale; }

  // Gamma(shape, rate 1) by Marsaglia-Tsang squeeze; shape < 1 uses the
  // boosting identity G(a) = G(a+1) * U^{1/a}, evaluated in logs so tiny
  // shapes underflow to zero instead of producing NaN.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw DomainError("gamma: shape must be positive");
    if (shape < 1.0) {
      double boost = std::exp(std::log(uniform()) / shape);
      return gamma(shape + 1.0) * boost;
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double t = 1.0 + c * x;
      if (t <= 0.0) continue;
      double v = t * t * t;
      double u = uniform();
      double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double gamma(double shape, double rate) { return gamma(shape) / rate; }

  double beta(double a, double b) {
    double x = gamma(a);
    double y = gamma(b);
    return x / (x + y);
  }

  // Dirichlet via normalised gammas. If every component underflows to zero
  // (all concentrations tiny) the mass is placed on the largest concentration.
  std::vector<double> dirichlet(std::span<const double> concentration) {
    std::vector<double> draw(concentration.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < concentration.size(); ++i) {
      draw[i] = gamma(concentration[i]);
      sum += draw[i];
    }
    if (sum <= 0.0) {
      std::size_t top = 0;
      for (std::size_t i = 1; i < concentration.size(); ++i)
        if (concentration[i] > concentration[top]) top = i;
      for (auto& v : draw) v = 0.0;
      draw[top] = 1.0;
      return draw;
    }
    for (auto& v : draw) v /= sum;
    return draw;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace cluster
