#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <span>
#include <vector>

#include "cluster/diagnostics.hpp"
#include "cluster/sampler.hpp"
#include "cluster/simulator.hpp"
#include "cluster/transform.hpp"

using namespace cluster;

namespace {

std::vector<std::vector<double>> pooled_component(const std::vector<ChainResult>& chains,
                                                  std::size_t index) {
  std::vector<std::vector<double>> series(chains.size());
  for (std::size_t c = 0; c < chains.size(); ++c) {
    series[c].reserve(chains[c].draws.size());
    for (const auto& draw : chains[c].draws) series[c].push_back(draw[index]);
  }
  return series;
}

double pooled_mean(const std::vector<std::vector<double>>& series) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& chain : series) {
    for (double v : chain) total += v;
    count += chain.size();
  }
  return total / static_cast<double>(count);
}

double pooled_variance(const std::vector<std::vector<double>>& series) {
  const double mean = pooled_mean(series);
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& chain : series) {
    for (double v : chain) total += (v - mean) * (v - mean);
    count += chain.size();
  }
  return total / static_cast<double>(count - 1);
}

// Log posterior of a binomial success probability under a flat prior,
// sampled on the logit scale: Beta(k+1, n-k+1) pushed through the
// transform with its Jacobian.
struct BetaBinomialTarget {
  double successes;
  double failures;

  double operator()(std::span<const double> z) const {
    const auto unit = unit_from_unconstrained(z[0]);
    return successes * std::log(unit.value) + failures * std::log1p(-unit.value) +
           unit.log_jacobian;
  }
};

// Zero-mean bivariate normal with covariance [[1, 0.6], [0.6, 2]].
struct GaussianTarget {
  double operator()(std::span<const double> z) const {
    const double det = 1.0 * 2.0 - 0.6 * 0.6;
    const double q =
        (2.0 * z[0] * z[0] - 2.0 * 0.6 * z[0] * z[1] + 1.0 * z[1] * z[1]) / det;
    return -0.5 * q;
  }
};

}  // namespace

TEST_CASE("conjugate binomial posterior is recovered through the engine", "[inference]") {
  // 17 successes in 50 trials, flat prior: posterior Beta(18, 34).
  const BetaBinomialTarget target{17.0, 33.0};
  const std::vector<ParameterBlock> blocks = {{"probability", 0, 1}};
  SamplerConfig config;
  config.n_chains = 4;
  config.n_warmup = 1000;
  config.n_draws = 5000;
  config.base_seed = 2024;
  auto chains = sample_chains(target, blocks, config,
                              [](std::size_t, Rng& rng) {
                                return std::vector<double>{rng.normal(0.0, 1.0)};
                              });
  REQUIRE(chains.size() == 4);

  std::vector<std::vector<double>> probability(chains.size());
  for (std::size_t c = 0; c < chains.size(); ++c)
    for (const auto& draw : chains[c].draws)
      probability[c].push_back(unit_from_unconstrained(draw[0]).value);

  const double a = 18.0, b = 34.0;
  const double true_mean = a / (a + b);
  const double true_var = a * b / ((a + b) * (a + b) * (a + b + 1.0));
  const double ess = effective_sample_size(probability);
  REQUIRE(ess > 100.0);

  const double mean = pooled_mean(probability);
  const double variance = pooled_variance(probability);
  const double mean_se = std::sqrt(true_var / ess);
  CHECK(std::abs(mean - true_mean) < 3.0 * mean_se);
  const double var_se = true_var * std::sqrt(2.0 / ess);
  CHECK(std::abs(variance - true_var) < 3.0 * var_se);
  CHECK(split_r_hat(probability) < 1.05);
}

TEST_CASE("engine reproduces a correlated gaussian covariance", "[inference]") {
  const GaussianTarget target;
  const std::vector<ParameterBlock> blocks = {{"x0", 0, 1}, {"x1", 1, 1}};
  SamplerConfig config;
  config.n_chains = 4;
  config.n_warmup = 1000;
  config.n_draws = 25000;  // 1e5 pooled draws
  config.base_seed = 7;
  auto chains = sample_chains(target, blocks, config,
                              [](std::size_t, Rng& rng) {
                                return std::vector<double>{rng.normal(), rng.normal()};
                              });

  double n = 0.0, sum0 = 0.0, sum1 = 0.0;
  for (const auto& chain : chains)
    for (const auto& draw : chain.draws) {
      sum0 += draw[0];
      sum1 += draw[1];
      n += 1.0;
    }
  const double mean0 = sum0 / n, mean1 = sum1 / n;
  double c00 = 0.0, c01 = 0.0, c11 = 0.0;
  for (const auto& chain : chains)
    for (const auto& draw : chain.draws) {
      c00 += (draw[0] - mean0) * (draw[0] - mean0);
      c01 += (draw[0] - mean0) * (draw[1] - mean1);
      c11 += (draw[1] - mean1) * (draw[1] - mean1);
    }
  c00 /= n - 1.0;
  c01 /= n - 1.0;
  c11 /= n - 1.0;

  CHECK(std::abs(c00 - 1.0) < 0.05 * 1.0);
  CHECK(std::abs(c11 - 2.0) < 0.05 * 2.0);
  CHECK(std::abs(c01 - 0.6) < 0.05 * 0.6);

  for (const auto& chain : chains)
    for (double rate : chain.acceptance_rates) {
      CHECK(rate > 0.15);
      CHECK(rate < 0.45);
    }

  for (std::size_t k = 0; k < 2; ++k) CHECK(split_r_hat(pooled_component(chains, k)) < 1.02);
}

TEST_CASE("sampling is deterministic in the seed", "[inference]") {
  const GaussianTarget target;
  const std::vector<ParameterBlock> blocks = {{"x", 0, 2}};
  SamplerConfig config;
  config.n_chains = 2;
  config.n_warmup = 50;
  config.n_draws = 100;
  config.base_seed = 11;
  const auto init = [](std::size_t, Rng& rng) {
    return std::vector<double>{rng.normal(), rng.normal()};
  };
  auto first = sample_chains(target, blocks, config, init);
  auto second = sample_chains(target, blocks, config, init);
  REQUIRE(first.size() == second.size());
  for (std::size_t c = 0; c < first.size(); ++c) {
    REQUIRE(first[c].draws == second[c].draws);
    REQUIRE(first[c].log_densities == second[c].log_densities);
  }

  config.base_seed = 12;
  auto third = sample_chains(target, blocks, config, init);
  CHECK(first[0].draws != third[0].draws);
}

TEST_CASE("chains differ across seed streams", "[inference]") {
  const GaussianTarget target;
  const std::vector<ParameterBlock> blocks = {{"x", 0, 2}};
  SamplerConfig config;
  config.n_chains = 2;
  config.n_warmup = 50;
  config.n_draws = 100;
  config.base_seed = 11;
  auto chains = sample_chains(target, blocks, config, [](std::size_t, Rng& rng) {
    return std::vector<double>{rng.normal(), rng.normal()};
  });
  CHECK(chains[0].draws != chains[1].draws);
}

TEST_CASE("hopeless initialisation raises after the attempt budget", "[inference]") {
  const auto target = [](std::span<const double>) {
    return -std::numeric_limits<double>::infinity();
  };
  const std::vector<ParameterBlock> blocks = {{"x", 0, 1}};
  SamplerConfig config;
  config.n_chains = 1;
  config.n_warmup = 5;
  config.n_draws = 5;
  config.max_init_attempts = 3;
  CHECK_THROWS_AS(sample_chains(target, blocks, config,
                                [](std::size_t, Rng& rng) {
                                  return std::vector<double>{rng.normal()};
                                }),
                  NonFiniteDensity);
  CHECK_THROWS_AS(run_chain(target, blocks, config, {0.0}, Rng(1)), NonFiniteDensity);
}

TEST_CASE("model fit produces valid draws and round-trips coordinates", "[inference]") {
  ScenarioConfig scenario;
  scenario.n_providers = 4;
  scenario.n_users = 30;
  scenario.total_steps = 2000;
  scenario.toggle_period = 100;
  scenario.seed = 5;
  const Dataset data = run_simulation(scenario);

  ModelConfig model;
  model.variant = ModelVariant::Complete;
  model.n_clusters = 5;
  SamplerConfig sampler;
  sampler.n_chains = 2;
  sampler.n_warmup = 200;
  sampler.n_draws = 100;
  sampler.base_seed = 42;

  const PosteriorSamples fit = run_chains(model, data, sampler);
  REQUIRE(fit.chains.size() == 2);
  REQUIRE(fit.n_total_draws() == 200);
  CHECK(fit.n_providers == data.n_providers);
  CHECK(fit.dataset_fingerprint == dataset_fingerprint(data));
  CHECK(fit.block_names.size() == 2 + 2 * model.n_clusters);

  for (const auto& chain : fit.chains) {
    REQUIRE(chain.draws.size() == sampler.n_draws);
    REQUIRE(chain.log_densities.size() == sampler.n_draws);
    for (double density : chain.log_densities) REQUIRE(std::isfinite(density));
    for (const auto& params : chain.draws) {
      REQUIRE(params.concentration > 0.0);
      REQUIRE(params.dp_scale > 0.0);
      const auto weights = mixture_weights(model, params);
      REQUIRE(is_simplex(weights.simplex));
      for (const auto& row : params.preferences) REQUIRE(is_simplex(row));
    }
  }

  // Stored constrained draws map back to unconstrained coordinates and
  // return unchanged.
  const auto& params = fit.chains[0].draws[0];
  const auto z = to_unconstrained(model, params);
  const auto back = from_unconstrained(model, data.n_providers, z);
  REQUIRE(std::abs(back.params.concentration - params.concentration) < 1e-10);
  REQUIRE(std::abs(back.params.dp_scale - params.dp_scale) < 1e-10);
  for (std::size_t j = 0; j < model.n_clusters; ++j) {
    REQUIRE(std::abs(back.params.fractions[j] - params.fractions[j]) < 1e-10);
    for (std::size_t i = 0; i < data.n_providers; ++i)
      REQUIRE(std::abs(back.params.preferences[j][i] - params.preferences[j][i]) < 1e-10);
  }

  // pooled_draw walks chains in order.
  CHECK(&fit.pooled_draw(0) == &fit.chains[0].draws[0]);
  CHECK(&fit.pooled_draw(sampler.n_draws) == &fit.chains[1].draws[0]);
  CHECK_THROWS_AS(fit.pooled_draw(fit.n_total_draws()), DomainError);

  const auto series = fit.scalar_series(
      [](const ModelParams& p) { return p.concentration; });
  REQUIRE(series.size() == 2);
  REQUIRE(series[0].size() == sampler.n_draws);
}
