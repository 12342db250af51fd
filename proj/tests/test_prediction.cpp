#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cluster/prediction.hpp"
#include "cluster/simulator.hpp"

using namespace cluster;

namespace {

ModelParams point_params(double concentration, std::vector<std::vector<double>> preferences,
                         std::vector<double> weights) {
  ModelParams params;
  params.concentration = concentration;
  params.weights = std::move(weights);
  params.preferences = std::move(preferences);
  return params;
}

// Posterior stub holding explicit draws of a naive-variant model.
PosteriorSamples stub_posterior(std::vector<ModelParams> draws,
                                LikelihoodKind likelihood = LikelihoodKind::Dirichlet) {
  PosteriorSamples posterior;
  posterior.model.variant = ModelVariant::Naive;
  posterior.model.likelihood = likelihood;
  posterior.model.n_clusters = draws.front().weights.size();
  posterior.n_providers = draws.front().preferences.front().size();
  ChainSamples chain;
  chain.draws = std::move(draws);
  posterior.chains.push_back(std::move(chain));
  return posterior;
}

}  // namespace

TEST_CASE("a concentrated posterior pins the predictive draws", "[prediction]") {
  auto posterior = stub_posterior({point_params(1e12, {{0.5, 0.5}}, {1.0})});
  const std::vector<double> u = {1.0, 1.0};
  const auto pred = draw_predictive(posterior, u, 100.0, 200, 5);
  REQUIRE(pred.n_draws() == 200);
  CHECK(pred.rejected == 0);
  validate_predictive(pred);
  for (const auto& row : pred.draws) {
    CHECK(std::abs(row[0] - 50.0) < 1e-3);
    CHECK(std::abs(row[1] - 50.0) < 1e-3);
  }
}

TEST_CASE("predictive mean matches the pooled-draw average", "[prediction]") {
  std::vector<ModelParams> draws;
  draws.push_back(point_params(40.0, {{0.7, 0.2, 0.1}}, {1.0}));
  draws.push_back(point_params(25.0, {{0.2, 0.5, 0.3}}, {1.0}));
  draws.push_back(point_params(60.0, {{0.1, 0.1, 0.8}}, {1.0}));
  auto posterior = stub_posterior(std::move(draws));
  const std::vector<double> u = {1.0, 0.5, 1.0};
  const double total = 60.0;
  const std::size_t q = 100000;
  const auto pred = draw_predictive(posterior, u, total, q, 11);
  validate_predictive(pred);

  std::vector<double> direct(3, 0.0);
  for (std::size_t d = 0; d < 3; ++d) {
    const auto p = model_proportions(posterior.model, posterior.pooled_draw(d), u);
    for (std::size_t i = 0; i < 3; ++i) direct[i] += p[i] * total / 3.0;
  }
  const auto mean = nominal_prediction(pred);
  const auto sd = predictive_sd(pred);
  for (std::size_t i = 0; i < 3; ++i) {
    const double se = sd[i] / std::sqrt(static_cast<double>(q));
    CHECK(std::abs(mean[i] - direct[i]) < 3.0 * se);
  }
}

TEST_CASE("posterior draws are consumed by deterministic cycling", "[prediction]") {
  std::vector<ModelParams> draws;
  draws.push_back(point_params(1e12, {{0.9, 0.1}}, {1.0}));
  draws.push_back(point_params(1e12, {{0.5, 0.5}}, {1.0}));
  draws.push_back(point_params(1e12, {{0.1, 0.9}}, {1.0}));
  auto posterior = stub_posterior(std::move(draws));
  const std::vector<double> u = {1.0, 1.0};
  const auto pred = draw_predictive(posterior, u, 100.0, 7, 3);
  const std::vector<double> first_loads = {90.0, 50.0, 10.0};
  for (std::size_t q = 0; q < pred.n_draws(); ++q)
    CHECK(std::abs(pred.draws[q][0] - first_loads[q % 3]) < 1e-3);

  const auto repeat = draw_predictive(posterior, u, 100.0, 7, 3);
  CHECK(repeat.draws == pred.draws);
  const auto reseeded = draw_predictive(posterior, u, 100.0, 7, 4);
  CHECK(reseeded.draws != pred.draws);
}

TEST_CASE("singular posterior draws are skipped and counted", "[prediction]") {
  std::vector<ModelParams> draws;
  draws.push_back(point_params(50.0, {{1.0, 0.0}}, {1.0}));  // no mass on provider 2
  draws.push_back(point_params(50.0, {{0.5, 0.5}}, {1.0}));
  auto posterior = stub_posterior(std::move(draws));
  const std::vector<double> u = {0.0, 1.0};
  const auto pred = draw_predictive(posterior, u, 80.0, 10, 17);
  REQUIRE(pred.n_draws() == 10);
  CHECK(pred.rejected == 10);  // every other cycle position is singular
  validate_predictive(pred);
  const auto mean = nominal_prediction(pred);
  CHECK(mean[1] > 79.0);  // only provider 2 is available

  auto hopeless = stub_posterior({point_params(50.0, {{1.0, 0.0}}, {1.0})});
  CHECK_THROWS_AS(draw_predictive(hopeless, u, 80.0, 10, 17), SingularPreference);
}

TEST_CASE("predictive input validation", "[prediction]") {
  auto posterior = stub_posterior({point_params(50.0, {{0.5, 0.5}}, {1.0})});
  const std::vector<double> dark = {0.0, 0.0};
  CHECK_THROWS_AS(draw_predictive(posterior, dark, 100.0, 10, 1), EmptyActiveSet);
  const std::vector<double> wide = {1.0, 1.0, 1.0};
  CHECK_THROWS_AS(draw_predictive(posterior, wide, 100.0, 10, 1), DimensionMismatch);
  const std::vector<double> u = {1.0, 1.0};
  CHECK_THROWS_AS(draw_predictive(posterior, u, 0.0, 10, 1), DomainError);
  CHECK_THROWS_AS(draw_predictive(posterior, u, 100.0, 0, 1), DomainError);
  const std::vector<double> outside = {1.5, 1.0};
  CHECK_THROWS_AS(draw_predictive(posterior, outside, 100.0, 10, 1), DomainError);

  PosteriorSamples empty;
  empty.model.n_clusters = 1;
  empty.n_providers = 2;
  CHECK_THROWS_AS(draw_predictive(empty, u, 100.0, 10, 1), InsufficientDraws);
}

TEST_CASE("multinomial predictive draws are scaled counts", "[prediction]") {
  auto posterior = stub_posterior({point_params(50.0, {{0.6, 0.4}}, {1.0})},
                                  LikelihoodKind::Multinomial);
  const std::vector<double> u = {1.0, 1.0};
  const double total = 50.4;  // rounds to 50 trials, rescaled back
  const auto pred = draw_predictive(posterior, u, total, 4000, 23);
  validate_predictive(pred);
  const double unit = total / 50.0;
  for (const auto& row : pred.draws)
    for (double v : row) {
      const double trials = v / unit;
      CHECK(std::abs(trials - std::round(trials)) < 1e-9);
    }
  const auto mean = nominal_prediction(pred);
  const auto sd = predictive_sd(pred);
  const double se = sd[0] / std::sqrt(4000.0);
  CHECK(std::abs(mean[0] - 0.6 * total) < 3.0 * se);
}

TEST_CASE("nominal prediction and error are simple moments", "[prediction]") {
  PredictiveSamples pred;
  pred.availability = {1.0, 1.0};
  pred.total = 100.0;
  pred.draws = {{10.0, 90.0}, {30.0, 70.0}};
  const auto nominal = nominal_prediction(pred);
  CHECK(nominal == std::vector<double>{20.0, 80.0});
  CHECK(nominal[0] + nominal[1] == Catch::Approx(100.0));

  const std::vector<double> truth = {25.0, 75.0};
  const auto error = nominal_error(nominal, truth);
  CHECK(error == std::vector<double>{-5.0, 5.0});
  CHECK(error[0] + error[1] == Catch::Approx(0.0).margin(1e-12));
  CHECK(nominal_error(nominal, nominal) == std::vector<double>{0.0, 0.0});
  const std::vector<double> short_truth = {25.0};
  CHECK_THROWS_AS(nominal_error(nominal, short_truth), DimensionMismatch);

  PredictiveSamples empty;
  CHECK_THROWS_AS(nominal_prediction(empty), InsufficientDraws);
}

TEST_CASE("predictive sd uses the q-1 denominator", "[prediction]") {
  PredictiveSamples constant;
  constant.availability = {1.0, 1.0};
  constant.total = 100.0;
  constant.draws = {{40.0, 60.0}, {40.0, 60.0}, {40.0, 60.0}};
  for (double v : predictive_sd(constant)) CHECK(v == 0.0);

  PredictiveSamples two;
  two.availability = {1.0, 1.0};
  two.total = 100.0;
  two.draws = {{0.0, 100.0}, {100.0, 0.0}};
  const auto sd = predictive_sd(two);
  CHECK(sd[0] == Catch::Approx(std::sqrt(5000.0)));
  CHECK(sd[1] == Catch::Approx(std::sqrt(5000.0)));

  PredictiveSamples single;
  single.availability = {1.0, 1.0};
  single.total = 100.0;
  single.draws = {{40.0, 60.0}};
  CHECK_THROWS_AS(predictive_sd(single), InsufficientDraws);
}

TEST_CASE("predictive variance matches the dirichlet law", "[prediction]") {
  const double concentration = 30.0;
  auto posterior = stub_posterior({point_params(concentration, {{0.7, 0.2, 0.1}}, {1.0})});
  const std::vector<double> u = {1.0, 1.0, 1.0};
  const double total = 80.0;
  const std::size_t q = 100000;
  const auto pred = draw_predictive(posterior, u, total, q, 29);
  const auto sd = predictive_sd(pred);
  const std::vector<double> p = {0.7, 0.2, 0.1};
  for (std::size_t i = 0; i < 3; ++i) {
    const double variance = total * total * p[i] * (1.0 - p[i]) / (concentration + 1.0);
    const double se = variance * std::sqrt(2.0 / static_cast<double>(q - 1));
    CHECK(std::abs(sd[i] * sd[i] - variance) < 4.0 * se);
  }
}

TEST_CASE("shrinkage contracts draws around preserved means", "[prediction]") {
  PredictiveSamples pred;
  pred.availability = {1.0, 1.0};
  pred.total = 10.0;
  pred.draws = {{10.0, 0.0}, {2.0, 8.0}};  // provider means 6 and 4

  const auto identity = shrink_samples(pred, 1.0);
  CHECK(identity.draws == pred.draws);
  CHECK(identity.clamped == 0);

  const auto shrunk = shrink_samples(pred, 2.0);
  CHECK(shrunk.draws[0] == std::vector<double>{8.0, 2.0});
  CHECK(shrunk.draws[1] == std::vector<double>{4.0, 6.0});
  CHECK(shrunk.clamped == 0);
  validate_predictive(shrunk);
  CHECK(nominal_prediction(shrunk) == nominal_prediction(pred));

  const auto sd_before = predictive_sd(pred);
  const auto sd_after = predictive_sd(shrunk);
  for (std::size_t i = 0; i < 2; ++i)
    CHECK(std::abs(sd_after[i] - sd_before[i] / 2.0) < 1e-9);

  CHECK_THROWS_AS(shrink_samples(pred, 0.5), DomainError);
}

TEST_CASE("shrinkage selection recovers the calibrating factor", "[prediction]") {
  ShrinkageConfig config;
  config.grid = {1.0, 1.5, 2.0, 2.5, 3.0};

  Rng rng(71);
  std::vector<std::vector<double>> calibrated, inflated;
  std::vector<double> truths;
  for (int pair = 0; pair < 400; ++pair) {
    const double mean = rng.normal(50.0, 5.0);
    std::vector<double> well(300), wide(300);
    for (std::size_t i = 0; i < 300; ++i) {
      well[i] = rng.normal(mean, 1.0);
      wide[i] = rng.normal(mean, 2.0);  // variance inflated fourfold
    }
    calibrated.push_back(std::move(well));
    inflated.push_back(std::move(wide));
    truths.push_back(rng.normal(mean, 1.0));
  }
  CHECK(select_shrinkage(calibrated, truths, config) == 1.0);
  const double selected = select_shrinkage(inflated, truths, config);
  CHECK(selected >= 1.5);
  CHECK(selected <= 2.5);

  ShrinkageConfig singleton;
  singleton.grid = {1.75};
  CHECK(select_shrinkage(calibrated, truths, singleton) == 1.75);

  ShrinkageConfig bad;
  bad.grid = {0.5};
  CHECK_THROWS_AS(select_shrinkage(calibrated, truths, bad), ConfigError);
  bad.grid = {};
  CHECK_THROWS_AS(select_shrinkage(calibrated, truths, bad), ConfigError);
}

TEST_CASE("a fitted posterior predicts its own training records", "[prediction]") {
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
  sampler.n_warmup = 400;
  sampler.n_draws = 300;
  sampler.base_seed = 42;
  const PosteriorSamples fit = run_chains(model, data, sampler);

  const auto& record = data.records.front();
  const auto pred =
      draw_predictive(fit, record.availability, record.total, fit.n_total_draws(), 9);
  validate_predictive(pred);
  const auto nominal = nominal_prediction(pred);
  const auto sd = predictive_sd(pred);
  const auto error = nominal_error(nominal, record.loads);
  double mae = 0.0, mean_sd = 0.0;
  for (std::size_t i = 0; i < error.size(); ++i) {
    mae += std::abs(error[i]);
    mean_sd += sd[i];
  }
  mae /= static_cast<double>(error.size());
  mean_sd /= static_cast<double>(sd.size());
  CHECK(mae <= 3.0 * mean_sd);

  // Shrinkage selection runs end to end on a handful of records.
  Dataset validation;
  validation.n_providers = data.n_providers;
  validation.total_load = data.total_load;
  validation.records.assign(data.records.begin(), data.records.begin() + 5);
  ShrinkageConfig config;
  config.grid = {1.0, 1.5, 2.0};
  const double s = select_shrinkage(fit, validation, config, 200, 13);
  CHECK((s == 1.0 || s == 1.5 || s == 2.0));
}
