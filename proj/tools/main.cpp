#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "cluster/cluster.hpp"

namespace {

using cluster::json;

// Stream indices reserved for pipeline-level randomness, clear of the
// per-record streams used by prediction.
constexpr std::uint64_t kSplitStream = 1000001;
constexpr std::uint64_t kShrinkStream = 1000003;

std::vector<double> parse_real_list(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t pos = text.find(',', start);
    if (pos == std::string::npos) pos = text.size();
    const std::string item = text.substr(start, pos - start);
    double value = 0.0;
    auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc() || end != item.data() + item.size())
      throw cluster::ConfigError(flag + ": bad list element '" + item + "'");
    values.push_back(value);
    start = pos + 1;
  }
  if (values.empty()) throw cluster::ConfigError(flag + ": empty list");
  return values;
}

json input_entry(const std::string& path) {
  return json{{"path", path}, {"fingerprint", cluster::fnv1a64_hex(cluster::read_file(path))}};
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::string config_path;
  std::string out_path;
  std::string train_path;
  std::string test_path;
  double split_fraction = 0.0;
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateOptions& opt) {
  cluster::ScenarioConfig scenario;
  if (!opt.config_path.empty()) scenario = cluster::load_config(opt.config_path).scenario;
  if (opt.seed) scenario.seed = *opt.seed;
  scenario.validate();

  const bool split = opt.split_fraction > 0.0;
  if (opt.out_path.empty() && !split)
    throw cluster::ConfigError("simulate: need --out or --split with --train-out/--test-out");
  if (split && (opt.train_path.empty() || opt.test_path.empty()))
    throw cluster::ConfigError("simulate: --split requires --train-out and --test-out");
  if (split && !(opt.split_fraction < 1.0))
    throw cluster::ConfigError("simulate: --split fraction must lie in (0, 1)");

  const cluster::Dataset data = cluster::run_simulation(scenario);

  json manifest = cluster::make_manifest(
      "simulate", json{{"scenario", cluster::to_json(scenario)}}, json::object(),
      json{{"seed", scenario.seed}});

  if (!opt.out_path.empty()) {
    cluster::save_dataset(opt.out_path, data);
    cluster::write_manifest_sidecar(opt.out_path, manifest);
  }
  if (split) {
    cluster::Rng rng(cluster::stream_seed(scenario.seed, kSplitStream));
    auto [train, test] = cluster::split_dataset(data, opt.split_fraction, rng);

    manifest["config"]["split"] =
        json{{"fraction", opt.split_fraction}, {"n_train", train.records.size()},
             {"n_test", test.records.size()}};
    cluster::save_dataset(opt.train_path, train);
    cluster::write_manifest_sidecar(opt.train_path, manifest);
    cluster::save_dataset(opt.test_path, test);
    cluster::write_manifest_sidecar(opt.test_path, manifest);
    std::printf("simulate: %zu records (%zu train, %zu test), %zu providers, %zu users\n",
                data.records.size(), train.records.size(), test.records.size(),
                scenario.n_providers, scenario.n_users);
  } else {
    std::printf("simulate: %zu records, %zu providers, %zu users\n", data.records.size(),
                scenario.n_providers, scenario.n_users);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// infer

struct InferOptions {
  std::string config_path;
  std::string data_path;
  std::string out_path;
  std::string model;
  std::string likelihood;
  std::optional<std::size_t> clusters, chains, draws, warmup;
  std::optional<std::uint64_t> seed;
};

int cmd_infer(const InferOptions& opt) {
  cluster::ModelConfig model;
  cluster::SamplerConfig sampler;
  if (!opt.config_path.empty()) {
    const auto config = cluster::load_config(opt.config_path);
    model = config.model;
    sampler = config.sampler;
  }
  if (!opt.model.empty()) model.variant = cluster::model_variant_from_string(opt.model);
  if (!opt.likelihood.empty()) model.likelihood = cluster::likelihood_from_string(opt.likelihood);
  if (opt.clusters) model.n_clusters = *opt.clusters;
  if (opt.chains) sampler.n_chains = *opt.chains;
  if (opt.draws) sampler.n_draws = *opt.draws;
  if (opt.warmup) sampler.n_warmup = *opt.warmup;
  if (opt.seed) sampler.base_seed = *opt.seed;
  model.validate();
  sampler.validate();

  const cluster::Dataset data = cluster::load_dataset(opt.data_path);
  const auto samples = cluster::run_chains(model, data, sampler);

  const json manifest = cluster::make_manifest(
      "infer", json{{"model", cluster::to_json(model)}, {"sampler", cluster::to_json(sampler)}},
      json{{"data", input_entry(opt.data_path)}}, json{{"base_seed", sampler.base_seed}});
  cluster::save_posterior(samples, opt.out_path, manifest);

  const auto concentration =
      samples.scalar_series([](const cluster::ModelParams& p) { return p.concentration; });
  std::printf("infer: %zu chains x %zu draws, %zu blocks\n", samples.chains.size(),
              samples.chains.front().draws.size(), samples.block_names.size());
  std::printf("  concentration: split R-hat %.4f, ESS %.0f\n",
              cluster::split_r_hat(concentration), cluster::effective_sample_size(concentration));
  if (model.variant == cluster::ModelVariant::Complete) {
    const auto dp =
        samples.scalar_series([](const cluster::ModelParams& p) { return p.dp_scale; });
    std::printf("  dp_scale:      split R-hat %.4f, ESS %.0f\n", cluster::split_r_hat(dp),
                cluster::effective_sample_size(dp));
  }
  for (std::size_t c = 0; c < samples.chains.size(); ++c) {
    const auto& rates = samples.chains[c].acceptance_rates;
    const double mean = std::accumulate(rates.begin(), rates.end(), 0.0) / rates.size();
    std::printf("  chain %zu mean acceptance %.3f\n", c + 1, mean);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictOptions {
  std::string posterior_path;
  std::string data_path;
  std::string out_path;
  std::string calibration_path;
  std::string shrink_grid;
  std::string p_grid;
  std::size_t draws = 0;  // 0: one predictive draw per pooled posterior draw
  std::uint64_t seed = 1;
};

int cmd_predict(const PredictOptions& opt) {
  const auto loaded = cluster::load_posterior(opt.posterior_path);
  const auto& posterior = loaded.samples;
  const cluster::Dataset data = cluster::load_dataset(opt.data_path);
  if (data.n_providers != posterior.n_providers)
    throw cluster::SchemaError("predict: dataset has " + std::to_string(data.n_providers) +
                               " providers, posterior expects " +
                               std::to_string(posterior.n_providers));
  if (cluster::dataset_fingerprint(data) != posterior.dataset_fingerprint)
    std::fprintf(stderr,
                 "warning: dataset fingerprint differs from the posterior's training data\n");

  double shrink = 1.0;
  cluster::ShrinkageConfig shrink_config;
  if (!opt.p_grid.empty())
    shrink_config.percent_grid = parse_real_list(opt.p_grid, "--p-grid");
  if (!opt.shrink_grid.empty()) {
    if (opt.calibration_path.empty())
      throw cluster::ConfigError("predict: --shrink-grid requires --calibration");
    shrink_config.grid = parse_real_list(opt.shrink_grid, "--shrink-grid");
    const cluster::Dataset calibration = cluster::load_dataset(opt.calibration_path);
    shrink = cluster::select_shrinkage(posterior, calibration, shrink_config, opt.draws,
                                       cluster::stream_seed(opt.seed, kShrinkStream));
  }

  const std::size_t n_draws = opt.draws == 0 ? posterior.n_total_draws() : opt.draws;
  std::vector<cluster::PredictiveSamples> predictions;
  predictions.reserve(data.records.size());
  std::size_t rejected = 0;
  for (std::size_t r = 0; r < data.records.size(); ++r) {
    const auto& record = data.records[r];
    auto pred = cluster::draw_predictive(posterior, record.availability, record.total, n_draws,
                                         cluster::stream_seed(opt.seed, r));
    pred.scenario = r;
    if (shrink > 1.0) pred = cluster::shrink_samples(pred, shrink);
    rejected += pred.rejected;
    predictions.push_back(std::move(pred));
  }

  json inputs{{"posterior", input_entry(opt.posterior_path)},
              {"data", input_entry(opt.data_path)}};
  if (!opt.calibration_path.empty()) inputs["calibration"] = input_entry(opt.calibration_path);
  json config{{"draws_per_scenario", opt.draws}, {"shrink_factor", shrink}};
  if (!opt.shrink_grid.empty()) {
    config["shrink_grid"] = shrink_config.grid;
    config["percent_grid"] = shrink_config.percent_grid;
  }
  const json manifest = cluster::make_manifest("predict", config, std::move(inputs),
                                               json{{"seed", opt.seed}});
  cluster::save_predictive(predictions, opt.out_path, manifest);

  std::printf("predict: %zu scenarios x %zu draws, shrink factor %.3g, %zu rejected draws\n",
              predictions.size(), predictions.empty() ? 0 : predictions.front().n_draws(), shrink,
              rejected);
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
  std::string data_path;
  std::string pred_path;
  std::string posterior_path;
  std::string out_path;
  std::string p_grid;
  double delta = 1e-6;
};

double median_of(std::vector<double> values) {
  if (values.empty()) throw cluster::InsufficientSamples("median: no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

int cmd_evaluate(const EvaluateOptions& opt) {
  const cluster::Dataset data = cluster::load_dataset(opt.data_path);
  const auto loaded = cluster::load_predictive(opt.pred_path);
  const auto& predictions = loaded.predictions;
  if (predictions.size() != data.records.size())
    throw cluster::SchemaError("evaluate: " + std::to_string(predictions.size()) +
                               " predictive scenarios for " +
                               std::to_string(data.records.size()) + " dataset records");

  std::vector<double> percent_grid = cluster::default_percent_grid();
  if (!opt.p_grid.empty()) percent_grid = parse_real_list(opt.p_grid, "--p-grid");

  // Scoring pools only (record, provider) pairs with the provider available:
  // an unavailable provider carries zero load by construction, so its
  // point-mass-at-zero predictive would inflate coverage and drag the SD
  // median to zero without measuring anything.
  std::vector<std::vector<double>> error_rows;     // record x provider signed errors
  std::vector<std::vector<double>> sample_sets;    // pooled available pairs' draw sets
  std::vector<double> truths;
  std::vector<double> all_errors;
  std::vector<double> all_sds;
  std::vector<std::vector<double>> provider_sds(data.n_providers);
  std::size_t total_pairs = 0;

  for (std::size_t r = 0; r < predictions.size(); ++r) {
    const auto& pred = predictions[r];
    const auto& record = data.records[r];
    if (pred.n_providers() != data.n_providers)
      throw cluster::SchemaError("evaluate: provider count mismatch at scenario " +
                                 std::to_string(r));
    const auto nominal = cluster::nominal_prediction(pred);
    error_rows.push_back(cluster::nominal_error(nominal, record.loads));
    const auto sd = cluster::predictive_sd(pred);
    for (std::size_t i = 0; i < data.n_providers; ++i) {
      ++total_pairs;
      if (!(record.availability[i] > 0.0)) continue;
      all_errors.push_back(error_rows.back()[i]);
      all_sds.push_back(sd[i]);
      provider_sds[i].push_back(sd[i]);
      std::vector<double> samples(pred.n_draws());
      for (std::size_t q = 0; q < pred.n_draws(); ++q) samples[q] = pred.draws[q][i];
      sample_sets.push_back(std::move(samples));
      truths.push_back(record.loads[i]);
    }
  }
  if (all_errors.empty())
    throw cluster::InvariantError("evaluate: no available (record, provider) pairs to score");

  const double n_errors = static_cast<double>(all_errors.size());
  const double mean_error =
      std::accumulate(all_errors.begin(), all_errors.end(), 0.0) / n_errors;
  double var = 0.0;
  std::vector<double> abs_errors;
  std::size_t within5 = 0;
  for (double e : all_errors) {
    var += (e - mean_error) * (e - mean_error);
    abs_errors.push_back(std::abs(e));
    if (std::abs(e) <= 5.0) ++within5;
  }
  var = all_errors.size() > 1 ? var / (n_errors - 1.0) : 0.0;

  const auto curve = cluster::reliability_curve(sample_sets, truths, percent_grid);
  const auto mae = cluster::mae_matrix(error_rows);

  json reliability_points = json::array();
  for (const auto& point : curve.points)
    reliability_points.push_back(json{{"nominal", point.nominal},
                                      {"empirical", point.empirical},
                                      {"inside", point.inside}});

  json provider_sd_median = json::array();
  for (auto& sds : provider_sds)
    provider_sd_median.push_back(sds.empty() ? json() : json(median_of(std::move(sds))));

  json inputs{{"data", input_entry(opt.data_path)}, {"pred", input_entry(opt.pred_path)}};
  json report{
      {"format", "cluster-evaluation"},
      {"version", cluster::kEvaluationFormatVersion},
      {"n_scenarios", predictions.size()},
      {"n_providers", data.n_providers},
      {"errors",
       json{{"count", all_errors.size()},
            {"total_pairs", total_pairs},
            {"mean", mean_error},
            {"sd", std::sqrt(var)},
            {"median_abs", median_of(abs_errors)},
            {"within_5_users", static_cast<double>(within5) / n_errors}}},
      {"predictive_sd",
       json{{"median", median_of(all_sds)}, {"provider_median", provider_sd_median}}},
      {"reliability",
       json{{"grid", percent_grid},
            {"points", reliability_points},
            {"total", curve.total},
            {"calibration_deviation", cluster::calibration_deviation(curve)}}},
      {"mae", json{{"overall",
                    std::accumulate(abs_errors.begin(), abs_errors.end(), 0.0) / n_errors},
                   {"matrix", mae.absolute},
                   {"provider", mae.provider_mae},
                   {"scenario", mae.scenario_mae}}}};

  if (!opt.posterior_path.empty()) {
    const auto posterior = cluster::load_posterior(opt.posterior_path).samples;
    std::vector<std::vector<double>> weight_draws;
    std::vector<double> mean_weights;
    for (const auto& chain : posterior.chains)
      for (const auto& draw : chain.draws) {
        const auto weights = cluster::mixture_weights(posterior.model, draw);
        weight_draws.push_back(posterior.model.variant == cluster::ModelVariant::Complete
                                   ? weights.raw
                                   : weights.simplex);
        if (mean_weights.empty()) mean_weights.assign(weights.simplex.size(), 0.0);
        for (std::size_t j = 0; j < weights.simplex.size(); ++j)
          mean_weights[j] += weights.simplex[j];
      }
    for (double& w : mean_weights) w /= static_cast<double>(weight_draws.size());
    std::sort(mean_weights.begin(), mean_weights.end(), std::greater<>());
    const double top3 =
        std::accumulate(mean_weights.begin(),
                        mean_weights.begin() + std::min<std::size_t>(3, mean_weights.size()), 0.0);

    const auto truncation = cluster::truncation_count(weight_draws, opt.delta);
    json truncation_json{{"delta", truncation.delta},
                         {"reachable", truncation.counts.size()},
                         {"unreachable", truncation.unreachable},
                         {"mean_epsilon", truncation.mean_epsilon}};
    truncation_json["median_count"] =
        truncation.counts.empty() ? json() : json(truncation.median_count());
    report["truncation"] = std::move(truncation_json);
    report["weights"] = json{{"posterior_mean_sorted", mean_weights}, {"top3_mass", top3}};
    inputs["posterior"] = input_entry(opt.posterior_path);
  }

  report["manifest"] = cluster::make_manifest(
      "evaluate", json{{"delta", opt.delta}, {"p_grid", percent_grid}}, std::move(inputs),
      json::object());
  cluster::save_json_artifact(report, opt.out_path);

  std::printf("evaluate: mean error %.3f, median |error| %.3f, calibration deviation %.2f\n",
              mean_error, report["errors"]["median_abs"].get<double>(),
              report["reliability"]["calibration_deviation"].get<double>());
  return 0;
}

// ---------------------------------------------------------------------------
// report

struct ReportOptions {
  std::string report_path;
  std::string out_dir;
};

int cmd_report(const ReportOptions& opt) {
  const json report =
      cluster::load_json_artifact(opt.report_path, "cluster-evaluation",
                                  cluster::kEvaluationFormatVersion);
  std::filesystem::create_directories(opt.out_dir);
  const std::filesystem::path dir(opt.out_dir);

  std::string reliability = "nominal,empirical,inside,total\n";
  for (const auto& point : report.at("reliability").at("points"))
    reliability += std::to_string(point.at("nominal").get<double>()) + "," +
                   std::to_string(point.at("empirical").get<double>()) + "," +
                   std::to_string(point.at("inside").get<std::size_t>()) + "," +
                   std::to_string(report.at("reliability").at("total").get<std::size_t>()) + "\n";
  cluster::atomic_write_file(dir / "reliability.csv", reliability);

  std::string provider_mae = "provider,mae\n";
  const auto& provider = report.at("mae").at("provider");
  for (std::size_t i = 0; i < provider.size(); ++i)
    provider_mae += std::to_string(i + 1) + "," + std::to_string(provider[i].get<double>()) + "\n";
  cluster::atomic_write_file(dir / "mae_providers.csv", provider_mae);

  std::string scenario_mae = "scenario,mae\n";
  const auto& scenario = report.at("mae").at("scenario");
  for (std::size_t i = 0; i < scenario.size(); ++i)
    scenario_mae += std::to_string(i + 1) + "," + std::to_string(scenario[i].get<double>()) + "\n";
  cluster::atomic_write_file(dir / "mae_scenarios.csv", scenario_mae);

  std::string matrix = "scenario";
  const auto& mae_matrix = report.at("mae").at("matrix");
  for (std::size_t i = 1; i <= provider.size(); ++i) matrix += ",p_" + std::to_string(i);
  matrix += "\n";
  for (std::size_t r = 0; r < mae_matrix.size(); ++r) {
    matrix += std::to_string(r + 1);
    for (const auto& cell : mae_matrix[r]) matrix += "," + std::to_string(cell.get<double>());
    matrix += "\n";
  }
  cluster::atomic_write_file(dir / "mae_matrix.csv", matrix);

  std::string summary;
  summary += "scenarios:              " + std::to_string(report.at("n_scenarios").get<std::size_t>()) + "\n";
  summary += "providers:              " + std::to_string(report.at("n_providers").get<std::size_t>()) + "\n";
  const auto& errors = report.at("errors");
  summary += "mean error:             " + std::to_string(errors.at("mean").get<double>()) + "\n";
  summary += "error sd:               " + std::to_string(errors.at("sd").get<double>()) + "\n";
  summary += "median |error|:         " + std::to_string(errors.at("median_abs").get<double>()) + "\n";
  summary += "share within 5 users:   " + std::to_string(errors.at("within_5_users").get<double>()) + "\n";
  summary += "median predictive sd:   " +
             std::to_string(report.at("predictive_sd").at("median").get<double>()) + "\n";
  summary += "mean absolute error:    " + std::to_string(report.at("mae").at("overall").get<double>()) + "\n";
  summary += "calibration deviation:  " +
             std::to_string(report.at("reliability").at("calibration_deviation").get<double>()) + "\n";
  if (report.contains("truncation")) {
    const auto& truncation = report.at("truncation");
    summary += "median cluster count:   " +
               (truncation.at("median_count").is_number()
                    ? std::to_string(truncation.at("median_count").get<double>())
                    : std::string("unreachable")) +
               "\n";
    summary += "unreachable draws:      " +
               std::to_string(truncation.at("unreachable").get<std::size_t>()) + "\n";
  }
  if (report.contains("weights"))
    summary += "top-3 weight mass:      " +
               std::to_string(report.at("weights").at("top3_mass").get<double>()) + "\n";
  cluster::atomic_write_file(dir / "summary.txt", summary);
  std::fputs(summary.c_str(), stdout);
  return 0;
}

// ---------------------------------------------------------------------------
// export-prefs

struct ExportOptions {
  std::string posterior_path;
  std::string out_path;
};

int cmd_export_prefs(const ExportOptions& opt) {
  const auto posterior = cluster::load_posterior(opt.posterior_path).samples;
  std::string out = "chain,draw,cluster,weight";
  for (std::size_t i = 1; i <= posterior.n_providers; ++i) out += ",p_" + std::to_string(i);
  out += "\n";
  char buffer[40];
  for (std::size_t c = 0; c < posterior.chains.size(); ++c)
    for (std::size_t q = 0; q < posterior.chains[c].draws.size(); ++q) {
      const auto& draw = posterior.chains[c].draws[q];
      const auto weights = cluster::mixture_weights(posterior.model, draw);
      for (std::size_t j = 0; j < draw.preferences.size(); ++j) {
        out += std::to_string(c + 1) + "," + std::to_string(q + 1) + "," + std::to_string(j + 1);
        std::snprintf(buffer, sizeof(buffer), ",%.15g", weights.simplex[j]);
        out += buffer;
        for (double p : draw.preferences[j]) {
          std::snprintf(buffer, sizeof(buffer), ",%.15g", p);
          out += buffer;
        }
        out += "\n";
      }
    }
  cluster::atomic_write_file(opt.out_path, out);
  std::printf("export-prefs: wrote %zu clusters x %zu draws\n",
              posterior.chains.front().draws.front().preferences.size(),
              posterior.n_total_draws());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent preference-cluster inference pipeline"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
  simulate->add_option("--config", sim.config_path, "Run configuration file");
  simulate->add_option("--out", sim.out_path, "Dataset CSV output path");
  simulate->add_option("--seed", sim.seed, "Scenario seed override");
  simulate->add_option("--split", sim.split_fraction, "Held-out fraction for train/test split");
  simulate->add_option("--train-out", sim.train_path, "Training split output path");
  simulate->add_option("--test-out", sim.test_path, "Test split output path");

  InferOptions inf;
  auto* infer = app.add_subcommand("infer", "Fit the mixture model with MCMC");
  infer->add_option("--config", inf.config_path, "Run configuration file");
  infer->add_option("--data", inf.data_path, "Training dataset CSV")->required();
  infer->add_option("--out", inf.out_path, "Posterior NDJSON output path")->required();
  infer->add_option("--model", inf.model, "Model variant: naive|complete");
  infer->add_option("--likelihood", inf.likelihood, "Likelihood: dirichlet|multinomial");
  infer->add_option("--clusters", inf.clusters, "Truncation level W");
  infer->add_option("--chains", inf.chains, "Number of chains");
  infer->add_option("--draws", inf.draws, "Post-warmup draws per chain");
  infer->add_option("--warmup", inf.warmup, "Warmup sweeps per chain");
  infer->add_option("--seed", inf.seed, "Sampler base seed override");

  PredictOptions pre;
  auto* predict = app.add_subcommand("predict", "Draw posterior predictive loads");
  predict->add_option("--posterior", pre.posterior_path, "Posterior NDJSON")->required();
  predict->add_option("--data", pre.data_path, "Scenarios to predict (dataset CSV)")->required();
  predict->add_option("--out", pre.out_path, "Predictive NDJSON output path")->required();
  predict->add_option("--draws", pre.draws, "Predictive draws per scenario (0: one per posterior draw)");
  predict->add_option("--seed", pre.seed, "Predictive seed");
  predict->add_option("--shrink-grid", pre.shrink_grid, "Comma-separated shrinkage factors");
  predict->add_option("--calibration", pre.calibration_path,
                      "Labelled dataset CSV for shrinkage selection");
  predict->add_option("--p-grid", pre.p_grid, "Comma-separated HDI percent grid");

  EvaluateOptions eva;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against truth");
  evaluate->add_option("--data", eva.data_path, "Truth dataset CSV")->required();
  evaluate->add_option("--pred", eva.pred_path, "Predictive NDJSON")->required();
  evaluate->add_option("--posterior", eva.posterior_path,
                       "Posterior NDJSON for cluster diagnostics");
  evaluate->add_option("--out", eva.out_path, "Evaluation report JSON output path")->required();
  evaluate->add_option("--delta", eva.delta, "Truncation error threshold");
  evaluate->add_option("--p-grid", eva.p_grid, "Comma-separated HDI percent grid");

  ReportOptions rep;
  auto* report = app.add_subcommand("report", "Render an evaluation report to CSV/text");
  report->add_option("--report", rep.report_path, "Evaluation report JSON")->required();
  report->add_option("--out", rep.out_dir, "Output directory")->required();

  ExportOptions exp;
  auto* export_prefs =
      app.add_subcommand("export-prefs", "Dump posterior preference rows as CSV");
  export_prefs->add_option("--posterior", exp.posterior_path, "Posterior NDJSON")->required();
  export_prefs->add_option("--out", exp.out_path, "Preference CSV output path")->required();

  try {
    app.parse(argc, argv);
    if (simulate->parsed()) return cmd_simulate(sim);
    if (infer->parsed()) return cmd_infer(inf);
    if (predict->parsed()) return cmd_predict(pre);
    if (evaluate->parsed()) return cmd_evaluate(eva);
    if (report->parsed()) return cmd_report(rep);
    if (export_prefs->parsed()) return cmd_export_prefs(exp);
    return 2;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const cluster::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    switch (e.kind()) {
      case cluster::ErrorKind::Usage: return 2;
      case cluster::ErrorKind::Data: return 3;
      case cluster::ErrorKind::Runtime: return 1;
    }
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
