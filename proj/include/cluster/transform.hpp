#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "cluster/errors.hpp"
#include "cluster/simplex.hpp"

namespace cluster {

// log(1 + exp(x)) without overflow for large |x|.
inline double log1p_exp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double logit(double p) {
  if (!(p > 0.0) || !(p < 1.0)) throw BoundaryValue("logit: argument outside (0, 1)");
  return std::log(p) - std::log1p(-p);
}

inline double inverse_logit(double y) {
  if (y >= 0.0) return 1.0 / (1.0 + std::exp(-y));
  double e = std::exp(y);
  return e / (1.0 + e);
}

// log d/dy inverse_logit(y) = log sigma(y) + log(1 - sigma(y)).
inline double inverse_logit_log_jacobian(double y) { return -log1p_exp(-y) - log1p_exp(y); }

struct ScalarTransformResult {
  double value = 0.0;
  double log_jacobian = 0.0;
};

// Positive scalars are sampled on the log scale.
inline double positive_to_unconstrained(double x) {
  if (!(x > 0.0)) throw BoundaryValue("positive_to_unconstrained: argument must be positive");
  return std::log(x);
}

inline ScalarTransformResult positive_from_unconstrained(double y) {
  return {std::exp(y), y};
}

// Unit-interval scalars are sampled on the logit scale.
inline double unit_to_unconstrained(double p) { return logit(p); }

inline ScalarTransformResult unit_from_unconstrained(double y) {
  return {inverse_logit(y), inverse_logit_log_jacobian(y)};
}

// Centred stick-breaking simplex transform. A K-simplex maps to K-1
// unconstrained coordinates; the barycentre maps to the zero vector.
//   z_k = x_k / (remaining stick);  y_k = logit(z_k) + log(K - k - 1)
inline std::vector<double> simplex_to_unconstrained(std::span<const double> x) {
  check_simplex(x, "simplex_to_unconstrained: x");
  if (x.size() < 2) throw DomainError("simplex_to_unconstrained: need at least 2 components");
  const std::size_t n = x.size() - 1;
  std::vector<double> y(n);
  double stick = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(stick > 0.0)) throw BoundaryValue("simplex_to_unconstrained: stick exhausted");
    double z = x[k] / stick;
    if (!(z > 0.0) || !(z < 1.0))
      throw BoundaryValue("simplex_to_unconstrained: component on the simplex boundary");
    y[k] = logit(z) + std::log(static_cast<double>(n - k));
    stick -= x[k];
  }
  return y;
}

struct SimplexTransformResult {
  std::vector<double> value;   // point on the K-simplex, strictly interior
  double log_jacobian = 0.0;   // log |det d(value)/d(y)| of the inverse map
};

inline SimplexTransformResult simplex_from_unconstrained(std::span<const double> y) {
  if (y.empty()) throw DomainError("simplex_from_unconstrained: empty input");
  const std::size_t n = y.size();
  SimplexTransformResult result;
  result.value.resize(n + 1);
  double stick = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    double adjusted = y[k] - std::log(static_cast<double>(n - k));
    double z = inverse_logit(adjusted);
    result.value[k] = stick * z;
    result.log_jacobian += std::log(stick) - log1p_exp(-adjusted) - log1p_exp(adjusted);
    stick *= 1.0 - z;
  }
  result.value[n] = stick;
  return result;
}

}  // namespace cluster
