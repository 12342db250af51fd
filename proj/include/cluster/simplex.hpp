#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cluster/errors.hpp"

namespace cluster {

// Numeric tolerances shared across the library.
// Simplex membership: |sum - 1| <= kSimplexTol.
// Singularity guard: availability-weighted masses below kSingularTol are
// treated as zero before division.
inline constexpr double kSimplexTol = 1e-9;
inline constexpr double kSingularTol = 1e-12;

inline bool is_simplex(std::span<const double> x, double tol = kSimplexTol) {
  if (x.empty()) return false;
  double sum = 0.0;
  for (double v : x) {
    if (!(v >= 0.0) || !std::isfinite(v)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

inline void check_simplex(std::span<const double> x, const std::string& name,
                          double tol = kSimplexTol) {
  if (!is_simplex(x, tol))
    throw DomainError(name + ": components must be non-negative and sum to 1 within tolerance");
}

// Divides by the sum. DomainError if the sum is not strictly positive.
inline std::vector<double> normalize(std::span<const double> x) {
  double sum = 0.0;
  for (double v : x) sum += v;
  if (!(sum > 0.0)) throw DomainError("normalize: non-positive total");
  std::vector<double> out(x.begin(), x.end());
  for (auto& v : out) v /= sum;
  return out;
}

// Lifts boundary components to `floor`, then renormalizes. Keeps Dirichlet
// parameters and observed proportions strictly inside the simplex.
inline std::vector<double> clamp_to_interior(std::span<const double> x, double floor) {
  std::vector<double> out(x.begin(), x.end());
  double sum = 0.0;
  for (auto& v : out) {
    if (v < floor) v = floor;
    sum += v;
  }
  for (auto& v : out) v /= sum;
  return out;
}

// Preference score: availability-weighted preference mass, renormalised.
//   score_i = l_i * u_i / sum_k l_k * u_k
// Scale-invariant in u. SingularPreference if the weighted mass vanishes.
inline std::vector<double> preference_score(std::span<const double> preference,
                                            std::span<const double> availability) {
  if (preference.size() != availability.size())
    throw DimensionMismatch("preference_score: preference and availability lengths differ");
  if (preference.empty()) throw DimensionMismatch("preference_score: empty input");
  std::vector<double> score(preference.size());
  double mass = 0.0;
  for (std::size_t i = 0; i < preference.size(); ++i) {
    score[i] = preference[i] * availability[i];
    mass += score[i];
  }
  if (!(mass > kSingularTol))
    throw SingularPreference("preference_score: availability-weighted mass is zero");
  for (auto& v : score) v /= mass;
  return score;
}

// Proportion vector, matrix form:
//   A_hat = L diag(u);  A = diag(A_hat 1)^{-1} A_hat;  p = A^T w.
// Row j of A is the preference score of cluster j, so p sums to 1 whenever
// w does. SingularPreference names the first degenerate row.
inline std::vector<double> proportion_vector(const std::vector<std::vector<double>>& preferences,
                                             std::span<const double> weights,
                                             std::span<const double> availability) {
  if (preferences.size() != weights.size())
    throw DimensionMismatch("proportion_vector: row count does not match weight count");
  if (preferences.empty()) throw DimensionMismatch("proportion_vector: no clusters");
  check_simplex(weights, "proportion_vector: weights");
  const std::size_t n = availability.size();
  std::vector<double> proportions(n, 0.0);
  std::vector<double> row(n);
  for (std::size_t j = 0; j < preferences.size(); ++j) {
    if (preferences[j].size() != n)
      throw DimensionMismatch("proportion_vector: row " + std::to_string(j) + " has wrong length");
    double mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      row[i] = preferences[j][i] * availability[i];
      mass += row[i];
    }
    if (!(mass > kSingularTol))
      throw SingularPreference("proportion_vector: cluster row " + std::to_string(j) +
                               " has zero availability-weighted mass");
    for (std::size_t i = 0; i < n; ++i) proportions[i] += weights[j] * row[i] / mass;
  }
  return proportions;
}

// Proportion vector, summation form: p = sum_j w_j * preference_score(l_j, u).
// Kept as an independent code path; equivalence with the matrix form is a
// tested invariant.
inline std::vector<double> proportion_vector_weighted_sum(
    const std::vector<std::vector<double>>& preferences, std::span<const double> weights,
    std::span<const double> availability) {
  if (preferences.size() != weights.size())
    throw DimensionMismatch("proportion_vector_weighted_sum: row/weight mismatch");
  if (preferences.empty()) throw DimensionMismatch("proportion_vector_weighted_sum: no clusters");
  check_simplex(weights, "proportion_vector_weighted_sum: weights");
  std::vector<double> proportions(availability.size(), 0.0);
  for (std::size_t j = 0; j < preferences.size(); ++j) {
    std::vector<double> score = preference_score(preferences[j], availability);
    for (std::size_t i = 0; i < score.size(); ++i) proportions[i] += weights[j] * score[i];
  }
  return proportions;
}

struct StickBreakingResult {
  std::vector<double> weights;  // w_j = beta_j * prod_{k<j} (1 - beta_k)
  double remainder = 0.0;       // prod_j (1 - beta_j); weights + remainder sum to 1
};

// Stick-breaking construction. Fractions must lie strictly inside (0, 1).
inline StickBreakingResult stick_breaking(std::span<const double> fractions) {
  if (fractions.empty()) throw DomainError("stick_breaking: no fractions");
  StickBreakingResult result;
  result.weights.resize(fractions.size());
  double stick = 1.0;
  for (std::size_t j = 0; j < fractions.size(); ++j) {
    double b = fractions[j];
    if (!(b > 0.0) || !(b < 1.0))
      throw DomainError("stick_breaking: fraction " + std::to_string(j) +
                        " outside the open unit interval");
    result.weights[j] = b * stick;
    stick *= 1.0 - b;
  }
  result.remainder = stick;
  return result;
}

// Truncation error after the first m weights: eps(m) = 1 - sum_{k<=m} w_k.
inline double truncation_error(std::span<const double> weights, std::size_t m) {
  if (m > weights.size()) throw DomainError("truncation_error: m exceeds weight count");
  double sum = 0.0;
  for (std::size_t k = 0; k < m; ++k) sum += weights[k];
  return 1.0 - sum;
}

}  // namespace cluster
