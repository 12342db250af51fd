#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>

#include "cluster/errors.hpp"
#include "cluster/manifest.hpp"
#include "cluster/model.hpp"
#include "cluster/sampler.hpp"
#include "cluster/simulator.hpp"

namespace cluster {

// Flat key=value run configuration. Keys are the exact field names of
// ScenarioConfig, ModelConfig and SamplerConfig; '#' starts a comment;
// unknown or duplicate keys are errors so configs stay diff-friendly.
struct PipelineConfig {
  ScenarioConfig scenario;
  ModelConfig model;
  SamplerConfig sampler;
};

namespace detail {

inline std::string_view trim(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  return text;
}

template <typename T>
T parse_config_number(std::string_view value, std::size_t line_no, const std::string& key) {
  T parsed{};
  auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
  if (ec != std::errc() || end != value.data() + value.size())
    throw ConfigError("config line " + std::to_string(line_no) + ": bad value '" +
                      std::string(value) + "' for " + key);
  return parsed;
}

}  // namespace detail

inline PipelineConfig parse_config(std::string_view text) {
  PipelineConfig config;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    std::string_view line = text.substr(start, pos - start);
    start = pos + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key{detail::trim(line.substr(0, eq))};
    const std::string_view value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    if (!seen.insert(key).second)
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key " + key);

    const auto size = [&] { return detail::parse_config_number<std::size_t>(value, line_no, key); };
    const auto u64 = [&] { return detail::parse_config_number<std::uint64_t>(value, line_no, key); };
    const auto real = [&] { return detail::parse_config_number<double>(value, line_no, key); };

    if (key == "n_providers") config.scenario.n_providers = size();
    else if (key == "n_users") config.scenario.n_users = size();
    else if (key == "mobility_scale") config.scenario.mobility_scale = real();
    else if (key == "reversion_scale") config.scenario.reversion_scale = real();
    else if (key == "on_probability") config.scenario.on_probability = real();
    else if (key == "toggle_period") config.scenario.toggle_period = size();
    else if (key == "toggle_steps") config.scenario.toggle_steps = size();
    else if (key == "total_steps") config.scenario.total_steps = size();
    else if (key == "dt") config.scenario.dt = real();
    else if (key == "seed") config.scenario.seed = u64();
    else if (key == "variant") config.model.variant = model_variant_from_string(std::string(value));
    else if (key == "likelihood")
      config.model.likelihood = likelihood_from_string(std::string(value));
    else if (key == "n_clusters") config.model.n_clusters = size();
    else if (key == "concentration_shape") config.model.concentration_shape = real();
    else if (key == "concentration_rate") config.model.concentration_rate = real();
    else if (key == "dp_shape") config.model.dp_shape = real();
    else if (key == "dp_rate") config.model.dp_rate = real();
    else if (key == "boundary_clamp") config.model.boundary_clamp = real();
    else if (key == "n_chains") config.sampler.n_chains = size();
    else if (key == "n_warmup") config.sampler.n_warmup = size();
    else if (key == "n_draws") config.sampler.n_draws = size();
    else if (key == "base_seed") config.sampler.base_seed = u64();
    else if (key == "target_acceptance") config.sampler.target_acceptance = real();
    else if (key == "init_step_scale") config.sampler.init_step_scale = real();
    else if (key == "adapt_rate") config.sampler.adapt_rate = real();
    else if (key == "adapt_decay") config.sampler.adapt_decay = real();
    else if (key == "max_init_attempts") config.sampler.max_init_attempts = size();
    else
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key " + key);
  }
  config.scenario.validate();
  config.model.validate();
  config.sampler.validate();
  return config;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path));
}

}  // namespace cluster
