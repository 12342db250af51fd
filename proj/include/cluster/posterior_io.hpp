#pragma once

#include <cstddef>
#include <cstdint>
#include <ctime>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cluster/errors.hpp"
#include "cluster/manifest.hpp"
#include "cluster/model.hpp"
#include "cluster/prediction.hpp"
#include "cluster/sampler.hpp"
#include "cluster/simulator.hpp"

namespace cluster {

using nlohmann::json;

inline constexpr int kPosteriorFormatVersion = 1;
inline constexpr int kPredictiveFormatVersion = 1;
inline constexpr int kEvaluationFormatVersion = 1;

// ---------------------------------------------------------------------------
// Config snapshots. Keys match the config-file field names exactly so a
// manifest snapshot can be replayed as a config file.

inline json to_json(const ModelConfig& config) {
  return json{{"variant", to_string(config.variant)},
              {"likelihood", to_string(config.likelihood)},
              {"n_clusters", config.n_clusters},
              {"concentration_shape", config.concentration_shape},
              {"concentration_rate", config.concentration_rate},
              {"dp_shape", config.dp_shape},
              {"dp_rate", config.dp_rate},
              {"boundary_clamp", config.boundary_clamp}};
}

inline ModelConfig model_config_from_json(const json& j) {
  ModelConfig config;
  config.variant = model_variant_from_string(j.at("variant").get<std::string>());
  config.likelihood = likelihood_from_string(j.at("likelihood").get<std::string>());
  config.n_clusters = j.at("n_clusters").get<std::size_t>();
  config.concentration_shape = j.at("concentration_shape").get<double>();
  config.concentration_rate = j.at("concentration_rate").get<double>();
  config.dp_shape = j.at("dp_shape").get<double>();
  config.dp_rate = j.at("dp_rate").get<double>();
  config.boundary_clamp = j.at("boundary_clamp").get<double>();
  config.validate();
  return config;
}

inline json to_json(const SamplerConfig& config) {
  return json{{"n_chains", config.n_chains},
              {"n_warmup", config.n_warmup},
              {"n_draws", config.n_draws},
              {"base_seed", config.base_seed},
              {"target_acceptance", config.target_acceptance},
              {"init_step_scale", config.init_step_scale},
              {"adapt_rate", config.adapt_rate},
              {"adapt_decay", config.adapt_decay},
              {"max_init_attempts", config.max_init_attempts}};
}

inline SamplerConfig sampler_config_from_json(const json& j) {
  SamplerConfig config;
  config.n_chains = j.at("n_chains").get<std::size_t>();
  config.n_warmup = j.at("n_warmup").get<std::size_t>();
  config.n_draws = j.at("n_draws").get<std::size_t>();
  config.base_seed = j.at("base_seed").get<std::uint64_t>();
  config.target_acceptance = j.at("target_acceptance").get<double>();
  config.init_step_scale = j.at("init_step_scale").get<double>();
  config.adapt_rate = j.at("adapt_rate").get<double>();
  config.adapt_decay = j.at("adapt_decay").get<double>();
  config.max_init_attempts = j.at("max_init_attempts").get<std::size_t>();
  config.validate();
  return config;
}

inline json to_json(const ScenarioConfig& config) {
  return json{{"n_providers", config.n_providers},
              {"n_users", config.n_users},
              {"mobility_scale", config.mobility_scale},
              {"reversion_scale", config.reversion_scale},
              {"on_probability", config.on_probability},
              {"toggle_period", config.toggle_period},
              {"toggle_steps", config.toggle_steps},
              {"total_steps", config.total_steps},
              {"dt", config.dt},
              {"seed", config.seed}};
}

inline ScenarioConfig scenario_config_from_json(const json& j) {
  ScenarioConfig config;
  config.n_providers = j.at("n_providers").get<std::size_t>();
  config.n_users = j.at("n_users").get<std::size_t>();
  config.mobility_scale = j.at("mobility_scale").get<double>();
  config.reversion_scale = j.at("reversion_scale").get<double>();
  config.on_probability = j.at("on_probability").get<double>();
  config.toggle_period = j.at("toggle_period").get<std::size_t>();
  config.toggle_steps = j.at("toggle_steps").get<std::size_t>();
  config.total_steps = j.at("total_steps").get<std::size_t>();
  config.dt = j.at("dt").get<double>();
  config.seed = j.at("seed").get<std::uint64_t>();
  config.validate();
  return config;
}

// ---------------------------------------------------------------------------
// Run manifests. The embedded manifest is fully deterministic so artifacts
// can be regenerated byte-identically; wall-clock timestamps live only in
// the sidecar file next to each artifact.

inline json make_manifest(const std::string& command, json config, json inputs, json seeds) {
  return json{{"command", command},
              {"tool_version", CLUSTER_VERSION},
              {"config", std::move(config)},
              {"inputs", std::move(inputs)},
              {"seeds", std::move(seeds)}};
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm parts{};
  gmtime_r(&now, &parts);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &parts);
  return buffer;
}

inline void write_manifest_sidecar(const std::string& artifact_path, json manifest) {
  manifest["created"] = utc_timestamp();
  manifest["artifact"] = artifact_path;
  atomic_write_file(artifact_path + ".manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Posterior NDJSON: a header line carrying the manifest and run metadata,
// then one line per draw with constrained parameters.

namespace detail {

inline json params_to_json(const ModelConfig& config, const ModelParams& params) {
  json j{{"concentration", params.concentration}, {"preferences", params.preferences}};
  if (config.variant == ModelVariant::Naive) {
    j["weights"] = params.weights;
  } else {
    j["dp_scale"] = params.dp_scale;
    j["fractions"] = params.fractions;
  }
  return j;
}

inline ModelParams params_from_json(const ModelConfig& config, const json& j) {
  ModelParams params;
  params.concentration = j.at("concentration").get<double>();
  params.preferences = j.at("preferences").get<std::vector<std::vector<double>>>();
  if (config.variant == ModelVariant::Naive) {
    params.weights = j.at("weights").get<std::vector<double>>();
  } else {
    params.dp_scale = j.at("dp_scale").get<double>();
    params.fractions = j.at("fractions").get<std::vector<double>>();
  }
  return params;
}

inline json parse_line(const std::string& line, std::size_t line_number) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError("line " + std::to_string(line_number) + ": " + e.what());
  }
}

inline void check_header(const json& header, const std::string& format, int version) {
  if (!header.contains("format") || header.at("format") != format)
    throw SchemaError("not a " + format + " file");
  const int file_version = header.at("version").get<int>();
  if (file_version != version)
    throw VersionError("unsupported " + format + " version " + std::to_string(file_version) +
                       " (expected " + std::to_string(version) + ")");
}

// Splits into lines; the final line may lack a trailing newline.
inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = text.find('\n', start);
    if (end == std::string::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

}  // namespace detail

inline std::string posterior_to_ndjson(const PosteriorSamples& samples, const json& manifest) {
  json chains = json::array();
  for (const auto& chain : samples.chains)
    chains.push_back(json{{"n_draws", chain.draws.size()},
                          {"acceptance_rates", chain.acceptance_rates},
                          {"step_scales", chain.step_scales}});
  const json header{{"format", "cluster-posterior"},
                    {"version", kPosteriorFormatVersion},
                    {"manifest", manifest},
                    {"model", to_json(samples.model)},
                    {"sampler", to_json(samples.sampler)},
                    {"n_providers", samples.n_providers},
                    {"dataset_fingerprint", samples.dataset_fingerprint},
                    {"block_names", samples.block_names},
                    {"chains", chains}};
  std::string out = header.dump();
  out.push_back('\n');
  for (std::size_t c = 0; c < samples.chains.size(); ++c) {
    const auto& chain = samples.chains[c];
    for (std::size_t q = 0; q < chain.draws.size(); ++q) {
      const json line{{"chain", c},
                      {"draw", q},
                      {"log_density", chain.log_densities[q]},
                      {"params", detail::params_to_json(samples.model, chain.draws[q])}};
      out += line.dump();
      out.push_back('\n');
    }
  }
  return out;
}

struct LoadedPosterior {
  PosteriorSamples samples;
  json manifest;
};

inline LoadedPosterior posterior_from_ndjson(const std::string& text) {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw ParseError("line 1: empty posterior file");
  const json header = detail::parse_line(lines[0], 1);
  detail::check_header(header, "cluster-posterior", kPosteriorFormatVersion);

  LoadedPosterior loaded;
  loaded.manifest = header.at("manifest");
  auto& samples = loaded.samples;
  samples.model = model_config_from_json(header.at("model"));
  samples.sampler = sampler_config_from_json(header.at("sampler"));
  samples.n_providers = header.at("n_providers").get<std::size_t>();
  samples.dataset_fingerprint = header.at("dataset_fingerprint").get<std::string>();
  samples.block_names = header.at("block_names").get<std::vector<std::string>>();

  std::vector<std::size_t> expected;
  for (const auto& chain_meta : header.at("chains")) {
    ChainSamples chain;
    chain.acceptance_rates = chain_meta.at("acceptance_rates").get<std::vector<double>>();
    chain.step_scales = chain_meta.at("step_scales").get<std::vector<double>>();
    expected.push_back(chain_meta.at("n_draws").get<std::size_t>());
    samples.chains.push_back(std::move(chain));
  }

  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const json line = detail::parse_line(lines[i], i + 1);
    std::size_t chain_index, draw_index;
    try {
      chain_index = line.at("chain").get<std::size_t>();
      draw_index = line.at("draw").get<std::size_t>();
      if (chain_index >= samples.chains.size())
        throw ParseError("line " + std::to_string(i + 1) + ": chain index out of range");
      auto& chain = samples.chains[chain_index];
      if (draw_index != chain.draws.size())
        throw ParseError("line " + std::to_string(i + 1) + ": out-of-order draw");
      chain.log_densities.push_back(line.at("log_density").get<double>());
      chain.draws.push_back(detail::params_from_json(samples.model, line.at("params")));
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(i + 1) + ": " + e.what());
    }
  }

  for (std::size_t c = 0; c < samples.chains.size(); ++c)
    if (samples.chains[c].draws.size() != expected[c])
      throw ParseError("line " + std::to_string(lines.size()) + ": truncated posterior (chain " +
                       std::to_string(c + 1) + " has " +
                       std::to_string(samples.chains[c].draws.size()) + " of " +
                       std::to_string(expected[c]) + " draws)");
  return loaded;
}

inline void save_posterior(const PosteriorSamples& samples, const std::string& path,
                           const json& manifest) {
  atomic_write_file(path, posterior_to_ndjson(samples, manifest));
  write_manifest_sidecar(path, manifest);
}

inline LoadedPosterior load_posterior(const std::string& path) {
  return posterior_from_ndjson(read_file(path));
}

// ---------------------------------------------------------------------------
// Predictive NDJSON: header, then per scenario one descriptor line followed
// by its draw lines.

inline std::string predictive_to_ndjson(const std::vector<PredictiveSamples>& predictions,
                                        const json& manifest) {
  const json header{{"format", "cluster-predictive"},
                    {"version", kPredictiveFormatVersion},
                    {"manifest", manifest},
                    {"n_scenarios", predictions.size()}};
  std::string out = header.dump();
  out.push_back('\n');
  for (const auto& pred : predictions) {
    const json descriptor{{"scenario", pred.scenario}, {"availability", pred.availability},
                          {"total", pred.total},       {"n_draws", pred.draws.size()},
                          {"rejected", pred.rejected}, {"clamped", pred.clamped}};
    out += descriptor.dump();
    out.push_back('\n');
    for (std::size_t q = 0; q < pred.draws.size(); ++q) {
      const json line{{"scenario", pred.scenario}, {"draw", q}, {"loads", pred.draws[q]}};
      out += line.dump();
      out.push_back('\n');
    }
  }
  return out;
}

struct LoadedPredictive {
  std::vector<PredictiveSamples> predictions;
  json manifest;
};

inline LoadedPredictive predictive_from_ndjson(const std::string& text) {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw ParseError("line 1: empty predictive file");
  const json header = detail::parse_line(lines[0], 1);
  detail::check_header(header, "cluster-predictive", kPredictiveFormatVersion);

  LoadedPredictive loaded;
  loaded.manifest = header.at("manifest");
  const auto n_scenarios = header.at("n_scenarios").get<std::size_t>();
  std::vector<std::size_t> expected;

  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const json line = detail::parse_line(lines[i], i + 1);
    try {
      if (line.contains("availability")) {
        PredictiveSamples pred;
        pred.scenario = line.at("scenario").get<std::size_t>();
        pred.availability = line.at("availability").get<std::vector<double>>();
        pred.total = line.at("total").get<double>();
        pred.rejected = line.at("rejected").get<std::size_t>();
        pred.clamped = line.at("clamped").get<std::size_t>();
        expected.push_back(line.at("n_draws").get<std::size_t>());
        loaded.predictions.push_back(std::move(pred));
      } else {
        if (loaded.predictions.empty())
          throw ParseError("line " + std::to_string(i + 1) + ": draw before scenario descriptor");
        auto& pred = loaded.predictions.back();
        if (line.at("scenario").get<std::size_t>() != pred.scenario)
          throw ParseError("line " + std::to_string(i + 1) + ": scenario mismatch");
        if (line.at("draw").get<std::size_t>() != pred.draws.size())
          throw ParseError("line " + std::to_string(i + 1) + ": out-of-order draw");
        pred.draws.push_back(line.at("loads").get<std::vector<double>>());
      }
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(i + 1) + ": " + e.what());
    }
  }

  if (loaded.predictions.size() != n_scenarios)
    throw ParseError("line " + std::to_string(lines.size()) + ": truncated predictive (" +
                     std::to_string(loaded.predictions.size()) + " of " +
                     std::to_string(n_scenarios) + " scenarios)");
  for (std::size_t k = 0; k < loaded.predictions.size(); ++k) {
    if (loaded.predictions[k].draws.size() != expected[k])
      throw ParseError("line " + std::to_string(lines.size()) + ": truncated predictive (scenario " +
                       std::to_string(loaded.predictions[k].scenario) + " has " +
                       std::to_string(loaded.predictions[k].draws.size()) + " of " +
                       std::to_string(expected[k]) + " draws)");
    validate_predictive(loaded.predictions[k]);
  }
  return loaded;
}

inline void save_predictive(const std::vector<PredictiveSamples>& predictions,
                            const std::string& path, const json& manifest) {
  atomic_write_file(path, predictive_to_ndjson(predictions, manifest));
  write_manifest_sidecar(path, manifest);
}

inline LoadedPredictive load_predictive(const std::string& path) {
  return predictive_from_ndjson(read_file(path));
}

// ---------------------------------------------------------------------------
// Single-object JSON artifacts (evaluation reports).

inline void save_json_artifact(const json& artifact, const std::string& path) {
  atomic_write_file(path, artifact.dump(2) + "\n");
  if (artifact.contains("manifest")) write_manifest_sidecar(path, artifact.at("manifest"));
}

inline json load_json_artifact(const std::string& path, const std::string& format, int version) {
  json artifact;
  try {
    artifact = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  detail::check_header(artifact, format, version);
  return artifact;
}

}  // namespace cluster
