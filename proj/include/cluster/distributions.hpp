#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cluster/errors.hpp"
#include "cluster/rng.hpp"
#include "cluster/simplex.hpp"

namespace cluster {

// Thread-safe lgamma; std::lgamma may touch the signgam global.
inline double log_gamma_fn(double x) {
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

// log Dirichlet(x; alpha) on the simplex.
// DomainError on non-positive alpha, BoundaryValue when any x_i == 0.
inline double dirichlet_log_density(std::span<const double> x, std::span<const double> alpha) {
  if (x.size() != alpha.size())
    throw DimensionMismatch("dirichlet_log_density: value/parameter lengths differ");
  check_simplex(x, "dirichlet_log_density: x");
  double alpha_sum = 0.0;
  double log_density = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(alpha[i] > 0.0)) throw DomainError("dirichlet_log_density: alpha must be positive");
    if (x[i] == 0.0)
      throw BoundaryValue("dirichlet_log_density: x lies on the simplex boundary");
    alpha_sum += alpha[i];
    log_density += (alpha[i] - 1.0) * std::log(x[i]) - log_gamma_fn(alpha[i]);
  }
  return log_density + log_gamma_fn(alpha_sum);
}

inline std::vector<double> dirichlet_sample(std::span<const double> alpha, Rng& rng) {
  for (double a : alpha)
    if (!(a > 0.0)) throw DomainError("dirichlet_sample: alpha must be positive");
  return rng.dirichlet(alpha);
}

// Sequential conditional binomials: component i is Binomial over the
// remaining trials with the renormalised tail probability.
inline std::vector<std::int64_t> multinomial_sample(std::int64_t n, std::span<const double> p,
                                                    Rng& rng) {
  if (n < 0) throw DomainError("multinomial_sample: negative trial count");
  check_simplex(p, "multinomial_sample: p");
  std::vector<std::int64_t> counts(p.size(), 0);
  auto remaining = static_cast<std::uint64_t>(n);
  double tail = 1.0;
  for (std::size_t i = 0; i + 1 < p.size() && remaining > 0; ++i) {
    const double conditional = std::min(1.0, std::max(0.0, p[i] / tail));
    const std::uint64_t k = rng.binomial(remaining, conditional);
    counts[i] = static_cast<std::int64_t>(k);
    remaining -= k;
    tail -= p[i];
    if (tail <= 0.0) break;
  }
  counts.back() += static_cast<std::int64_t>(remaining);
  return counts;
}

struct DirichletMoments {
  std::vector<double> mean;
  std::vector<double> variance;
};

// Moments of Dirichlet(c * p): mean p, variance p_i (1 - p_i) / (c + 1).
inline DirichletMoments dirichlet_moments(std::span<const double> p, double concentration) {
  if (!(concentration > 0.0)) throw DomainError("dirichlet_moments: concentration must be positive");
  check_simplex(p, "dirichlet_moments: p");
  DirichletMoments m;
  m.mean.assign(p.begin(), p.end());
  m.variance.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    m.variance[i] = p[i] * (1.0 - p[i]) / (concentration + 1.0);
  return m;
}

// log Multinomial(counts; p) with total implied by the counts.
// Zero-probability cells with zero counts contribute nothing; a positive
// count on a zero-probability cell gives -infinity.
inline double multinomial_log_pmf(std::span<const std::int64_t> counts,
                                  std::span<const double> p) {
  if (counts.size() != p.size())
    throw DimensionMismatch("multinomial_log_pmf: count/probability lengths differ");
  check_simplex(p, "multinomial_log_pmf: p");
  std::int64_t total = 0;
  for (auto c : counts) {
    if (c < 0) throw DomainError("multinomial_log_pmf: negative count");
    total += c;
  }
  double log_pmf = log_gamma_fn(static_cast<double>(total) + 1.0);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    if (p[i] == 0.0) return -std::numeric_limits<double>::infinity();
    log_pmf += static_cast<double>(counts[i]) * std::log(p[i]) -
               log_gamma_fn(static_cast<double>(counts[i]) + 1.0);
  }
  return log_pmf;
}

// Scalar log-densities. Gamma uses the shape/rate convention throughout.
inline double gamma_log_pdf(double x, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw DomainError("gamma_log_pdf: bad parameters");
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - log_gamma_fn(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

inline double beta_log_pdf(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("beta_log_pdf: bad parameters");
  if (!(x > 0.0) || !(x < 1.0)) return -std::numeric_limits<double>::infinity();
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) + log_gamma_fn(a + b) -
         log_gamma_fn(a) - log_gamma_fn(b);
}

inline double normal_log_pdf(double x, double mean, double sd) {
  if (!(sd > 0.0)) throw DomainError("normal_log_pdf: sd must be positive");
  double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.91893853320467274178032973640562;
}

inline double half_normal_log_pdf(double x, double scale) {
  if (!(scale > 0.0)) throw DomainError("half_normal_log_pdf: scale must be positive");
  if (x < 0.0) return -std::numeric_limits<double>::infinity();
  double z = x / scale;
  return std::log(2.0) - 0.5 * z * z - std::log(scale) - 0.91893853320467274178032973640562;
}

// Inverse standard normal CDF (Acklam's rational approximation with one
// Halley refinement; relative error below 1e-13 on (0, 1)).
inline double inverse_normal_cdf(double p) {
  if (!(p > 0.0) || !(p < 1.0)) throw DomainError("inverse_normal_cdf: p must be in (0, 1)");
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    double q = p - 0.5;
    double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double e = 0.5 * std::erfc(-x / 1.4142135623730950488016887242097) - p;
  double u = e * 2.5066282746310002 * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace cluster
