#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cluster/distributions.hpp"
#include "cluster/errors.hpp"

namespace cluster {

namespace detail {

inline void check_chain_shape(const std::vector<std::vector<double>>& chains,
                              std::size_t min_draws, const char* op) {
  if (chains.size() < 2)
    throw InsufficientSamples(std::string(op) + ": need at least 2 chains");
  for (const auto& chain : chains) {
    if (chain.size() != chains.front().size())
      throw DimensionMismatch(std::string(op) + ": chains differ in length");
    if (chain.size() < min_draws)
      throw InsufficientSamples(std::string(op) + ": need at least " +
                                std::to_string(min_draws) + " draws per chain");
  }
}

inline bool all_draws_identical(const std::vector<std::vector<double>>& chains) {
  const double first = chains.front().front();
  for (const auto& chain : chains)
    for (double value : chain)
      if (value != first) return false;
  return true;
}

// 1-based fractional ranks; ties receive the average of their rank run.
inline std::vector<double> fractional_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    const double shared = 0.5 * static_cast<double>(i + j + 1);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = shared;
    i = j;
  }
  return ranks;
}

// Potential scale reduction over already-split sequences. A zero
// within-sequence variance with distinct sequence means is maximal
// disagreement, reported as infinity.
inline double psrf(const std::vector<std::vector<double>>& sequences) {
  const std::size_t m = sequences.size();
  const std::size_t n = sequences.front().size();
  std::vector<double> means(m), variances(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto& seq = sequences[j];
    double mean = 0.0;
    for (double v : seq) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : seq) ss += (v - mean) * (v - mean);
    means[j] = mean;
    variances[j] = ss / static_cast<double>(n - 1);
  }
  double within = 0.0;
  for (double v : variances) within += v;
  within /= static_cast<double>(m);
  double grand = 0.0;
  for (double v : means) grand += v;
  grand /= static_cast<double>(m);
  double between_over_n = 0.0;
  for (double v : means) between_over_n += (v - grand) * (v - grand);
  between_over_n /= static_cast<double>(m - 1);
  const double var_plus =
      within * static_cast<double>(n - 1) / static_cast<double>(n) + between_over_n;
  if (within <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(var_plus / within);
}

inline std::vector<std::vector<double>> split_halves(
    const std::vector<std::vector<double>>& chains) {
  const std::size_t half = chains.front().size() / 2;
  std::vector<std::vector<double>> halves;
  halves.reserve(2 * chains.size());
  for (const auto& chain : chains) {
    halves.emplace_back(chain.begin(), chain.begin() + half);
    halves.emplace_back(chain.end() - half, chain.end());
  }
  return halves;
}

// Pooled fractional ranks mapped through the normal quantile function,
// returned in the original chain layout.
inline std::vector<std::vector<double>> rank_normalize(
    const std::vector<std::vector<double>>& chains) {
  std::vector<double> pooled;
  for (const auto& chain : chains) pooled.insert(pooled.end(), chain.begin(), chain.end());
  const auto ranks = fractional_ranks(pooled);
  const double total = static_cast<double>(pooled.size());
  std::vector<std::vector<double>> normalized(chains.size());
  std::size_t cursor = 0;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    normalized[c].reserve(chains[c].size());
    for (std::size_t i = 0; i < chains[c].size(); ++i, ++cursor)
      normalized[c].push_back(inverse_normal_cdf((ranks[cursor] - 0.375) / (total + 0.25)));
  }
  return normalized;
}

}  // namespace detail

// Split potential scale reduction for one scalar quantity. Each chain is
// halved so within-chain drift also inflates the statistic. The value
// reported is the larger of the plain statistic and its rank-normalised
// counterpart: rank normalisation is robust to heavy tails but saturates
// for few chains, so taking the maximum keeps both failure modes visible.
// 1.0 indicates perfect mixing.
inline double split_r_hat(const std::vector<std::vector<double>>& chains) {
  detail::check_chain_shape(chains, 4, "split_r_hat");
  if (detail::all_draws_identical(chains))
    throw DegenerateChains("split_r_hat: all draws identical");
  const double plain = detail::psrf(detail::split_halves(chains));
  const double ranked = detail::psrf(detail::split_halves(detail::rank_normalize(chains)));
  return std::max(plain, ranked);
}

// Multi-chain effective sample size. Combined autocorrelations are summed
// in consecutive pairs and truncated at the first non-positive pair
// (Geyer's initial positive sequence) with a monotone correction; the
// implied correlation time is floored so super-efficient antithetic
// sampling yields a finite ESS above the raw draw count.
inline double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  detail::check_chain_shape(chains, 4, "effective_sample_size");
  if (detail::all_draws_identical(chains))
    throw DegenerateChains("effective_sample_size: all draws identical");

  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  std::vector<std::vector<double>> centered(m);
  std::vector<double> means(m), variances(m);
  for (std::size_t j = 0; j < m; ++j) {
    double mean = 0.0;
    for (double v : chains[j]) mean += v;
    mean /= static_cast<double>(n);
    means[j] = mean;
    centered[j].reserve(n);
    for (double v : chains[j]) centered[j].push_back(v - mean);
    double ss = 0.0;
    for (double v : centered[j]) ss += v * v;
    variances[j] = ss / static_cast<double>(n - 1);
  }
  double within = 0.0;
  for (double v : variances) within += v;
  within /= static_cast<double>(m);
  double grand = 0.0;
  for (double v : means) grand += v;
  grand /= static_cast<double>(m);
  double between_over_n = 0.0;
  for (double v : means) between_over_n += (v - grand) * (v - grand);
  between_over_n /= static_cast<double>(m - 1);
  const double var_plus =
      within * static_cast<double>(n - 1) / static_cast<double>(n) + between_over_n;
  if (var_plus <= 0.0)
    throw DegenerateChains("effective_sample_size: zero pooled variance");

  // Mean-over-chains autocovariance at one lag, divisor n.
  const auto autocovariance = [&](std::size_t lag) {
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const auto& x = centered[j];
      double acc = 0.0;
      for (std::size_t i = 0; i + lag < n; ++i) acc += x[i] * x[i + lag];
      total += acc / static_cast<double>(n);
    }
    return total / static_cast<double>(m);
  };
  const auto rho = [&](std::size_t lag) {
    return 1.0 - (within - autocovariance(lag)) / var_plus;
  };

  double tau = 0.0;
  double previous_pair = std::numeric_limits<double>::infinity();
  for (std::size_t lag = 0; lag + 1 < n; lag += 2) {
    const double pair = (lag == 0 ? 1.0 : rho(lag)) + rho(lag + 1);
    if (pair <= 0.0) break;
    tau += 2.0 * std::min(pair, previous_pair);
    previous_pair = std::min(pair, previous_pair);
  }
  tau -= 1.0;
  const double total_draws = static_cast<double>(m * n);
  tau = std::max(tau, 1.0 / std::log10(total_draws));
  return total_draws / tau;
}

// Bin counts of each chain's pooled ranks. Well-mixed chains fill the bins
// uniformly; a chain stuck in one region of the posterior piles into the
// low or high bins instead.
inline std::vector<std::vector<std::size_t>> rank_histogram(
    const std::vector<std::vector<double>>& chains, std::size_t n_bins = 20) {
  if (n_bins < 1) throw ConfigError("rank_histogram: n_bins must be at least 1");
  detail::check_chain_shape(chains, std::max<std::size_t>(n_bins, 2), "rank_histogram");
  std::vector<double> pooled;
  for (const auto& chain : chains) pooled.insert(pooled.end(), chain.begin(), chain.end());
  const auto ranks = detail::fractional_ranks(pooled);
  const double total = static_cast<double>(pooled.size());
  std::vector<std::vector<std::size_t>> histogram(chains.size(),
                                                  std::vector<std::size_t>(n_bins, 0));
  std::size_t cursor = 0;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t i = 0; i < chains[c].size(); ++i, ++cursor) {
      const double position = (ranks[cursor] - 0.5) / total;
      auto bin = static_cast<std::size_t>(position * static_cast<double>(n_bins));
      histogram[c][std::min(bin, n_bins - 1)] += 1;
    }
  }
  return histogram;
}

}  // namespace cluster
