#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cluster/distributions.hpp"
#include "cluster/errors.hpp"
#include "cluster/evaluation.hpp"
#include "cluster/model.hpp"
#include "cluster/sampler.hpp"

namespace cluster {

struct PredictiveSamples {
  std::size_t scenario = 0;
  std::vector<double> availability;        // profile the draws condition on
  double total = 0.0;                      // load mass M of every draw row
  std::vector<std::vector<double>> draws;  // Q rows of predicted per-provider loads
  std::size_t rejected = 0;                // singular posterior draws skipped
  std::size_t clamped = 0;                 // components clamped by shrinkage

  std::size_t n_draws() const { return draws.size(); }
  std::size_t n_providers() const { return availability.size(); }
};

inline void validate_predictive(const PredictiveSamples& pred, double tol = 1e-6) {
  for (std::size_t q = 0; q < pred.draws.size(); ++q) {
    const auto& row = pred.draws[q];
    if (row.size() != pred.availability.size())
      throw InvariantError("predictive draw " + std::to_string(q + 1) + ": wrong width");
    double sum = 0.0;
    for (double v : row) {
      if (v < 0.0)
        throw InvariantError("predictive draw " + std::to_string(q + 1) + ": negative load");
      sum += v;
    }
    if (std::abs(sum - pred.total) > tol)
      throw InvariantError("predictive draw " + std::to_string(q + 1) +
                           ": loads sum to " + std::to_string(sum) + ", expected " +
                           std::to_string(pred.total));
  }
}

// Q draws from the posterior predictive for a new availability profile.
// Posterior draws are consumed by deterministic cycling through the pooled
// chains; a draw whose active preference mass is singular for this profile
// is skipped (counted in `rejected`) and the cycle advances.
inline PredictiveSamples draw_predictive(const PosteriorSamples& posterior,
                                         std::span<const double> availability, double total,
                                         std::size_t n_draws, std::uint64_t seed) {
  const std::size_t pool = posterior.n_total_draws();
  if (pool == 0) throw InsufficientDraws("draw_predictive: posterior holds no draws");
  if (n_draws < 1) throw DomainError("draw_predictive: need at least one draw");
  if (availability.size() != posterior.n_providers)
    throw DimensionMismatch("draw_predictive: availability width does not match posterior");
  bool any_available = false;
  for (double u : availability) {
    if (u < 0.0 || u > 1.0)
      throw DomainError("draw_predictive: availability must lie in [0, 1]");
    if (u > 0.0) any_available = true;
  }
  if (!any_available) throw EmptyActiveSet("draw_predictive: no provider available");
  if (!(total > 0.0)) throw DomainError("draw_predictive: total load must be positive");

  PredictiveSamples pred;
  pred.availability.assign(availability.begin(), availability.end());
  pred.total = total;
  pred.draws.reserve(n_draws);

  Rng rng(seed);
  std::size_t cursor = 0;
  std::size_t consecutive_failures = 0;
  const bool multinomial = posterior.model.likelihood == LikelihoodKind::Multinomial;
  std::int64_t total_count = 0;
  if (multinomial) {
    total_count = static_cast<std::int64_t>(std::llround(total));
    if (total_count < 1) throw DomainError("draw_predictive: total load rounds to zero");
  }

  while (pred.draws.size() < n_draws) {
    const ModelParams& params = posterior.pooled_draw(cursor % pool);
    ++cursor;
    std::vector<double> p;
    try {
      p = model_proportions(posterior.model, params, availability);
    } catch (const SingularPreference&) {
      ++pred.rejected;
      if (++consecutive_failures >= pool)
        throw SingularPreference(
            "draw_predictive: every posterior draw is singular for this profile");
      continue;
    }
    consecutive_failures = 0;
    std::vector<double> row(p.size());
    if (multinomial) {
      const auto counts = multinomial_sample(total_count, p, rng);
      const double scale = total / static_cast<double>(total_count);
      for (std::size_t i = 0; i < row.size(); ++i)
        row[i] = static_cast<double>(counts[i]) * scale;
    } else {
      std::vector<double> alpha(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) alpha[i] = params.concentration * p[i];
      const auto proportions = rng.dirichlet(alpha);
      for (std::size_t i = 0; i < row.size(); ++i) row[i] = proportions[i] * total;
    }
    pred.draws.push_back(std::move(row));
  }
  return pred;
}

// Per-provider arithmetic mean of the draws.
inline std::vector<double> nominal_prediction(const PredictiveSamples& pred) {
  if (pred.draws.empty()) throw InsufficientDraws("nominal_prediction: no draws");
  std::vector<double> mean(pred.n_providers(), 0.0);
  for (const auto& row : pred.draws)
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += row[i];
  for (double& v : mean) v /= static_cast<double>(pred.draws.size());
  return mean;
}

inline std::vector<double> nominal_error(std::span<const double> nominal,
                                         std::span<const double> truth) {
  if (nominal.size() != truth.size())
    throw DimensionMismatch("nominal_error: prediction/truth widths differ");
  std::vector<double> error(nominal.size());
  for (std::size_t i = 0; i < error.size(); ++i) error[i] = nominal[i] - truth[i];
  return error;
}

// Per-provider sample standard deviation with Q-1 denominator.
inline std::vector<double> predictive_sd(const PredictiveSamples& pred) {
  if (pred.draws.size() < 2) throw InsufficientDraws("predictive_sd: need at least 2 draws");
  const auto mean = nominal_prediction(pred);
  std::vector<double> variance(mean.size(), 0.0);
  for (const auto& row : pred.draws)
    for (std::size_t i = 0; i < mean.size(); ++i)
      variance[i] += (row[i] - mean[i]) * (row[i] - mean[i]);
  std::vector<double> sd(mean.size());
  for (std::size_t i = 0; i < sd.size(); ++i)
    sd[i] = std::sqrt(variance[i] / static_cast<double>(pred.draws.size() - 1));
  return sd;
}

// Contracts every draw toward the per-provider mean by factor s, leaving
// the means unchanged. Non-negative draws stay non-negative under s >= 1;
// the clamp-and-renormalise path only guards degenerate inputs, and any
// clamp event is counted on the result.
inline PredictiveSamples shrink_samples(const PredictiveSamples& pred, double shrinkage) {
  if (!(shrinkage >= 1.0)) throw DomainError("shrink_samples: shrinkage must be at least 1");
  if (pred.draws.empty()) throw InsufficientDraws("shrink_samples: no draws");
  const auto mean = nominal_prediction(pred);
  PredictiveSamples shrunk = pred;
  for (auto& row : shrunk.draws) {
    bool clamped_row = false;
    double sum = 0.0;
    for (std::size_t i = 0; i < row.size(); ++i) {
      row[i] = (row[i] - mean[i]) / shrinkage + mean[i];
      if (row[i] < 0.0) {
        row[i] = 0.0;
        ++shrunk.clamped;
        clamped_row = true;
      }
      sum += row[i];
    }
    if (clamped_row) {
      if (!(sum > 0.0)) throw DomainError("shrink_samples: clamped row lost all mass");
      for (double& v : row) v *= pred.total / sum;
    }
  }
  return shrunk;
}

struct ShrinkageConfig {
  std::vector<double> grid = {1.0, 1.25, 1.5, 2.0, 2.5, 3.0};
  double validation_fraction = 0.2;  // honoured by callers that split datasets
  std::string metric = "calibration-deviation";
  std::vector<double> percent_grid = default_percent_grid();

  void validate() const {
    if (grid.empty()) throw ConfigError("shrinkage: empty grid");
    for (double s : grid)
      if (!(s >= 1.0)) throw ConfigError("shrinkage: grid values must be at least 1");
    if (!(validation_fraction > 0.0) || !(validation_fraction < 1.0))
      throw ConfigError("shrinkage: validation fraction must lie in (0, 1)");
    if (metric != "calibration-deviation")
      throw ConfigError("shrinkage: unknown selection metric " + metric);
    if (percent_grid.empty()) throw ConfigError("shrinkage: empty percent grid");
  }
};

// Grid value minimising mean absolute calibration deviation of the shrunk
// sample sets against the truths; ties resolve to the smallest s.
inline double select_shrinkage(const std::vector<std::vector<double>>& sample_sets,
                               std::span<const double> truths, const ShrinkageConfig& config) {
  config.validate();
  std::vector<double> grid = config.grid;
  std::sort(grid.begin(), grid.end());
  std::vector<double> means(sample_sets.size(), 0.0);
  for (std::size_t k = 0; k < sample_sets.size(); ++k) {
    if (sample_sets[k].empty()) throw InsufficientDraws("select_shrinkage: empty sample set");
    for (double v : sample_sets[k]) means[k] += v;
    means[k] /= static_cast<double>(sample_sets[k].size());
  }
  double best_s = grid.front();
  double best_deviation = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> shrunk(sample_sets.size());
  for (const double s : grid) {
    for (std::size_t k = 0; k < sample_sets.size(); ++k) {
      shrunk[k].resize(sample_sets[k].size());
      for (std::size_t q = 0; q < sample_sets[k].size(); ++q)
        shrunk[k][q] = (sample_sets[k][q] - means[k]) / s + means[k];
    }
    const double deviation =
        calibration_deviation(reliability_curve(shrunk, truths, config.percent_grid));
    if (deviation < best_deviation) {
      best_deviation = deviation;
      best_s = s;
    }
  }
  return best_s;
}

// Cross-validation wrapper: predicts every record of the validation set and
// pools (provider, record) pairs as repeated calibration experiments.
// Record r draws with stream member r of the seed. Providers unavailable in
// a record are excluded: their predictive mass is a point at zero, which
// would count as covered at every level and dilute the curve.
inline double select_shrinkage(const PosteriorSamples& posterior, const Dataset& validation,
                               const ShrinkageConfig& config, std::size_t draws_per_record,
                               std::uint64_t seed) {
  config.validate();
  if (validation.records.empty())
    throw InsufficientSamples("select_shrinkage: empty validation set");
  if (draws_per_record == 0) draws_per_record = posterior.n_total_draws();
  std::vector<std::vector<double>> sample_sets;
  std::vector<double> truths;
  for (std::size_t r = 0; r < validation.records.size(); ++r) {
    const auto& record = validation.records[r];
    const auto pred = draw_predictive(posterior, record.availability, record.total,
                                      draws_per_record, stream_seed(seed, r));
    for (std::size_t i = 0; i < pred.n_providers(); ++i) {
      if (!(record.availability[i] > 0.0)) continue;
      std::vector<double> samples(pred.n_draws());
      for (std::size_t q = 0; q < pred.n_draws(); ++q) samples[q] = pred.draws[q][i];
      sample_sets.push_back(std::move(samples));
      truths.push_back(record.loads[i]);
    }
  }
  if (sample_sets.empty()) throw InsufficientSamples("select_shrinkage: no available pairs");
  return select_shrinkage(sample_sets, truths, config);
}

}  // namespace cluster
