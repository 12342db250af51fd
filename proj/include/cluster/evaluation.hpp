#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cluster/errors.hpp"
#include "cluster/rng.hpp"
#include "cluster/simplex.hpp"

namespace cluster {

struct CredibleInterval {
  double lower = 0.0;
  double upper = 0.0;
  double mass = 0.0;
};

namespace detail {

inline CredibleInterval hdi_sorted(std::span<const double> sorted, double mass) {
  if (sorted.size() < 10) throw InsufficientSamples("hdi: need at least 10 samples");
  if (!(mass > 0.0) || !(mass < 1.0)) throw DomainError("hdi: mass must lie in (0, 1)");
  const auto n = sorted.size();
  auto window = static_cast<std::size_t>(
      std::ceil(mass * static_cast<double>(n) - 1e-9));
  window = std::clamp<std::size_t>(window, 1, n);
  std::size_t best = 0;
  double best_width = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + window <= n; ++i) {
    const double width = sorted[i + window - 1] - sorted[i];
    if (width < best_width) {
      best_width = width;
      best = i;
    }
  }
  return {sorted[best], sorted[best + window - 1], mass};
}

}  // namespace detail

// Shortest contiguous window of the sorted samples holding ceil(mass * n)
// of them; equal-width candidates resolve to the leftmost window.
inline CredibleInterval hdi(std::span<const double> samples, double mass) {
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  return detail::hdi_sorted(sorted, mass);
}

// Percentage of truths falling inside their paired interval, pooled over
// all (provider, scenario) pairs.
inline double empirical_coverage(std::span<const CredibleInterval> intervals,
                                 std::span<const double> truths) {
  if (intervals.size() != truths.size())
    throw DimensionMismatch("empirical_coverage: interval/truth counts differ");
  if (intervals.empty()) throw InsufficientSamples("empirical_coverage: no pairs");
  std::size_t inside = 0;
  for (std::size_t i = 0; i < truths.size(); ++i)
    if (truths[i] >= intervals[i].lower && truths[i] <= intervals[i].upper) ++inside;
  return 100.0 * static_cast<double>(inside) / static_cast<double>(truths.size());
}

struct ReliabilityPoint {
  double nominal = 0.0;    // requested mass, percent
  double empirical = 0.0;  // observed coverage, percent
  std::size_t inside = 0;  // truths inside at this mass
};

struct ReliabilityCurve {
  std::vector<ReliabilityPoint> points;
  std::size_t total = 0;  // (provider, scenario) pairs per point
};

inline std::vector<double> default_percent_grid() {
  std::vector<double> grid;
  for (int p = 5; p <= 95; p += 5) grid.push_back(static_cast<double>(p));
  return grid;
}

// Observed HDI coverage against requested mass over a percent grid.
// sample_sets[k] holds the predictive samples for pair k, aligned with
// truths[k].
inline ReliabilityCurve reliability_curve(const std::vector<std::vector<double>>& sample_sets,
                                          std::span<const double> truths,
                                          std::span<const double> percent_grid) {
  if (sample_sets.size() != truths.size())
    throw DimensionMismatch("reliability_curve: sample set/truth counts differ");
  if (sample_sets.empty()) throw InsufficientSamples("reliability_curve: no pairs");
  if (percent_grid.empty()) throw DomainError("reliability_curve: empty grid");
  for (std::size_t i = 0; i < percent_grid.size(); ++i) {
    if (!(percent_grid[i] > 0.0) || !(percent_grid[i] < 100.0))
      throw DomainError("reliability_curve: grid values must lie in (0, 100)");
    if (i > 0 && !(percent_grid[i] > percent_grid[i - 1]))
      throw DomainError("reliability_curve: grid must be strictly increasing");
  }
  std::vector<std::vector<double>> sorted_sets = sample_sets;
  for (auto& samples : sorted_sets) std::sort(samples.begin(), samples.end());
  ReliabilityCurve curve;
  curve.total = sample_sets.size();
  for (const double percent : percent_grid) {
    std::vector<CredibleInterval> intervals;
    intervals.reserve(sorted_sets.size());
    for (const auto& samples : sorted_sets)
      intervals.push_back(detail::hdi_sorted(samples, percent / 100.0));
    ReliabilityPoint point;
    point.nominal = percent;
    point.empirical = empirical_coverage(intervals, truths);
    point.inside = static_cast<std::size_t>(
        std::llround(point.empirical / 100.0 * static_cast<double>(curve.total)));
    curve.points.push_back(point);
  }
  return curve;
}

// Mean absolute gap between the curve and the diagonal, percentage points.
inline double calibration_deviation(const ReliabilityCurve& curve) {
  if (curve.points.empty()) throw InsufficientSamples("calibration_deviation: empty curve");
  double total = 0.0;
  for (const auto& point : curve.points) total += std::abs(point.empirical - point.nominal);
  return total / static_cast<double>(curve.points.size());
}

struct MaeMatrix {
  std::vector<std::vector<double>> absolute;  // scenario-major rows
  std::vector<double> provider_mae;           // column means
  std::vector<double> scenario_mae;           // row means
};

// errors[r][i] is the nominal error of provider i in scenario r.
inline MaeMatrix mae_matrix(const std::vector<std::vector<double>>& errors) {
  if (errors.empty() || errors.front().empty())
    throw InsufficientSamples("mae_matrix: no errors");
  const std::size_t n_providers = errors.front().size();
  MaeMatrix result;
  result.absolute.reserve(errors.size());
  result.provider_mae.assign(n_providers, 0.0);
  result.scenario_mae.reserve(errors.size());
  for (const auto& row : errors) {
    if (row.size() != n_providers) throw DimensionMismatch("mae_matrix: ragged error rows");
    std::vector<double> abs_row(n_providers);
    double row_total = 0.0;
    for (std::size_t i = 0; i < n_providers; ++i) {
      abs_row[i] = std::abs(row[i]);
      row_total += abs_row[i];
      result.provider_mae[i] += abs_row[i];
    }
    result.scenario_mae.push_back(row_total / static_cast<double>(n_providers));
    result.absolute.push_back(std::move(abs_row));
  }
  for (double& v : result.provider_mae) v /= static_cast<double>(errors.size());
  return result;
}

// ---------------------------------------------------------------------------
// Truncation diagnostics over raw stick-breaking weight draws.

struct TruncationReport {
  double delta = 0.0;
  std::vector<std::size_t> counts;    // significant-cluster count per reachable draw
  std::size_t unreachable = 0;        // draws whose leftover mass exceeds delta
  std::vector<double> mean_epsilon;   // mean truncation error after m components

  double median_count() const {
    if (counts.empty()) throw InsufficientSamples("median_count: no reachable draws");
    std::vector<std::size_t> sorted = counts;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    if (n % 2 == 1) return static_cast<double>(sorted[n / 2]);
    return 0.5 * static_cast<double>(sorted[n / 2 - 1] + sorted[n / 2]);
  }
};

// Truncation error after keeping m components: the weight mass beyond m,
// including mass never assigned to a component. Suffix summation keeps the
// boundary case exact, and an epsilon equal to delta counts as satisfied.
inline std::vector<double> truncation_errors(std::span<const double> weights) {
  if (weights.empty()) throw DomainError("truncation_errors: empty weights");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw DomainError("truncation_errors: negative weight");
    total += w;
  }
  if (total > 1.0 + kSimplexTol) throw DomainError("truncation_errors: weights exceed unit mass");
  const double remainder = (1.0 - total) > kSimplexTol ? (1.0 - total) : 0.0;
  std::vector<double> eps(weights.size());
  double tail = remainder;
  for (std::size_t m = weights.size(); m-- > 1;) {
    tail += weights[m];
    eps[m - 1] = tail;
  }
  eps[weights.size() - 1] = remainder;
  return eps;
}

// Smallest m with truncation error at or below delta.
inline std::size_t significant_cluster_count(std::span<const double> weights, double delta) {
  if (!(delta > 0.0) || !(delta < 1.0))
    throw DomainError("significant_cluster_count: delta must lie in (0, 1)");
  const auto eps = truncation_errors(weights);
  for (std::size_t m = 0; m < eps.size(); ++m)
    if (eps[m] <= delta) return m + 1;
  throw ThresholdUnreachable("significant_cluster_count: leftover mass " +
                             std::to_string(eps.back()) + " exceeds delta");
}

inline TruncationReport truncation_count(const std::vector<std::vector<double>>& weight_draws,
                                         double delta) {
  if (!(delta > 0.0) || !(delta < 1.0))
    throw DomainError("truncation_count: delta must lie in (0, 1)");
  if (weight_draws.empty()) throw InsufficientSamples("truncation_count: no draws");
  TruncationReport report;
  report.delta = delta;
  report.mean_epsilon.assign(weight_draws.front().size(), 0.0);
  for (const auto& weights : weight_draws) {
    if (weights.size() != report.mean_epsilon.size())
      throw DimensionMismatch("truncation_count: ragged weight draws");
    const auto eps = truncation_errors(weights);
    for (std::size_t m = 0; m < eps.size(); ++m) report.mean_epsilon[m] += eps[m];
    bool reached = false;
    for (std::size_t m = 0; m < eps.size(); ++m)
      if (eps[m] <= delta) {
        report.counts.push_back(m + 1);
        reached = true;
        break;
      }
    if (!reached) ++report.unreachable;
  }
  for (double& v : report.mean_epsilon) v /= static_cast<double>(weight_draws.size());
  return report;
}

// ---------------------------------------------------------------------------
// Cluster revelation over posterior preference rows.

struct KMeansResult {
  std::vector<std::size_t> labels;
  std::vector<std::vector<double>> centroids;
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // per Lloyd iteration of the winning restart
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
  return total;
}

inline KMeansResult kmeans_single(const std::vector<std::vector<double>>& rows, std::size_t k,
                                  Rng& rng) {
  const std::size_t n = rows.size();
  const std::size_t dim = rows.front().size();

  // k-means++ seeding: each new centroid is drawn with probability
  // proportional to squared distance from the chosen set.
  std::vector<std::vector<double>> centroids;
  centroids.reserve(k);
  centroids.push_back(rows[rng.uniform_index(n)]);
  std::vector<double> nearest(n);
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = squared_distance(rows[i], centroids[0]);
      for (std::size_t c = 1; c < centroids.size(); ++c)
        best = std::min(best, squared_distance(rows[i], centroids[c]));
      nearest[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cumulative = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        cumulative += nearest[i];
        if (cumulative >= target) {
          pick = i;
          break;
        }
        pick = i;
      }
    }
    centroids.push_back(rows[pick]);
  }

  KMeansResult result;
  result.labels.assign(n, 0);
  const auto assign = [&]() {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_dist = squared_distance(rows[i], centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double dist = squared_distance(rows[i], centroids[c]);
        if (dist < best_dist) {
          best_dist = dist;
          best = c;
        }
      }
      if (result.labels[i] != best) changed = true;
      result.labels[i] = best;
      inertia += best_dist;
    }
    result.inertia = inertia;
    return changed;
  };

  assign();
  result.inertia_trace.push_back(result.inertia);
  for (std::size_t iter = 0; iter < 200; ++iter) {
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++sizes[result.labels[i]];
      for (std::size_t d = 0; d < dim; ++d) sums[result.labels[i]][d] += rows[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) {
        // Relocate an empty centroid to the point worst served by its
        // current assignment.
        std::size_t worst = 0;
        double worst_dist = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double dist = squared_distance(rows[i], centroids[result.labels[i]]);
          if (dist > worst_dist) {
            worst_dist = dist;
            worst = i;
          }
        }
        centroids[c] = rows[worst];
      } else {
        for (std::size_t d = 0; d < dim; ++d)
          centroids[c][d] = sums[c][d] / static_cast<double>(sizes[c]);
      }
    }
    const bool changed = assign();
    result.inertia_trace.push_back(result.inertia);
    if (!changed) break;
  }
  result.centroids = std::move(centroids);
  return result;
}

}  // namespace detail

// Lloyd's algorithm with k-means++ seeding; the best of 20 restarts by
// inertia is kept. Restart r draws from stream member r of the seed, so
// results are reproducible.
inline KMeansResult kmeans_preferences(const std::vector<std::vector<double>>& rows,
                                       std::size_t k, std::uint64_t seed) {
  if (k < 1) throw DomainError("kmeans_preferences: k must be at least 1");
  if (rows.size() < k) throw InsufficientSamples("kmeans_preferences: fewer rows than clusters");
  const std::size_t dim = rows.front().size();
  for (const auto& row : rows)
    if (row.size() != dim) throw DimensionMismatch("kmeans_preferences: ragged rows");
  std::vector<std::vector<double>> distinct;
  for (const auto& row : rows) {
    if (std::find(distinct.begin(), distinct.end(), row) == distinct.end())
      distinct.push_back(row);
    if (distinct.size() >= k) break;
  }
  if (distinct.size() < k)
    throw DegenerateInput("kmeans_preferences: fewer distinct rows than clusters");

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::uint64_t restart = 0; restart < 20; ++restart) {
    Rng rng(stream_seed(seed, restart));
    auto candidate = detail::kmeans_single(rows, k, rng);
    if (candidate.inertia < best.inertia) best = std::move(candidate);
  }
  return best;
}

// Consecutive ratios of a preference vector visited in the given order
// (zero-based provider indices). Ratios far above 1 flag near-deterministic
// provider selection.
inline std::vector<double> preference_ratios(std::span<const double> preference,
                                             std::span<const std::size_t> order) {
  if (order.size() != preference.size())
    throw DimensionMismatch("preference_ratios: order length does not match");
  std::vector<bool> seen(preference.size(), false);
  for (std::size_t index : order) {
    if (index >= preference.size() || seen[index])
      throw DomainError("preference_ratios: order is not a permutation");
    seen[index] = true;
  }
  std::vector<double> ratios;
  ratios.reserve(preference.size() - 1);
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    const double numerator = preference[order[i]];
    const double denominator = preference[order[i + 1]];
    if (!(numerator > 0.0) || !(denominator > 0.0))
      throw DomainError("preference_ratios: ordered components must be positive");
    ratios.push_back(numerator / denominator);
  }
  return ratios;
}

}  // namespace cluster
