#pragma once

#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cluster/dataset_io.hpp"
#include "cluster/errors.hpp"
#include "cluster/model.hpp"
#include "cluster/rng.hpp"

namespace cluster {

struct SamplerConfig {
  std::size_t n_chains = 4;
  std::size_t n_warmup = 1000;
  std::size_t n_draws = 2000;
  std::uint64_t base_seed = 1;
  double target_acceptance = 0.3;
  double init_step_scale = 0.1;  // initial proposal scale per block
  double adapt_rate = 0.5;       // Robbins-Monro gain numerator
  double adapt_decay = 0.6;      // gain_t = adapt_rate / t^adapt_decay
  std::size_t max_init_attempts = 100;

  void validate() const {
    if (n_chains < 1) throw ConfigError("sampler: n_chains must be at least 1");
    if (n_draws < 1) throw ConfigError("sampler: n_draws must be at least 1");
    if (!(target_acceptance > 0.0) || !(target_acceptance < 1.0))
      throw ConfigError("sampler: target_acceptance must lie in (0, 1)");
    if (!(init_step_scale > 0.0)) throw ConfigError("sampler: init_step_scale must be positive");
    if (!(adapt_rate > 0.0)) throw ConfigError("sampler: adapt_rate must be positive");
    if (!(adapt_decay > 0.0) || !(adapt_decay <= 1.0))
      throw ConfigError("sampler: adapt_decay must lie in (0, 1]");
    if (max_init_attempts < 1) throw ConfigError("sampler: max_init_attempts must be at least 1");
  }
};

// Raw output of one chain over unconstrained coordinates.
struct ChainResult {
  std::vector<std::vector<double>> draws;  // n_draws rows, post-warmup only
  std::vector<double> log_densities;       // log posterior per kept draw
  std::vector<double> acceptance_rates;    // per block, measured after warmup
  std::vector<double> step_scales;         // per block, frozen at end of warmup
};

// Blockwise adaptive random-walk Metropolis. Each sweep proposes an
// isotropic normal step for every block in order; during warmup each block's
// log step scale follows a Robbins-Monro recursion toward the target
// acceptance rate and is frozen afterwards. `target` must be callable as
// double(std::span<const double>) and return -infinity outside the support.
template <typename Target>
ChainResult run_chain(const Target& target, std::span<const ParameterBlock> blocks,
                      const SamplerConfig& config, std::vector<double> init, Rng rng) {
  config.validate();
  if (blocks.empty()) throw DomainError("run_chain: no parameter blocks");
  double log_density = target(init);
  if (!std::isfinite(log_density))
    throw NonFiniteDensity("run_chain: initial point has non-finite density");

  const std::size_t n_blocks = blocks.size();
  std::vector<double> log_scales(n_blocks, std::log(config.init_step_scale));
  std::vector<std::size_t> accepts(n_blocks, 0);
  std::vector<double> state = std::move(init);
  std::vector<double> proposal = state;

  ChainResult result;
  result.draws.reserve(config.n_draws);
  result.log_densities.reserve(config.n_draws);

  const std::size_t total_sweeps = config.n_warmup + config.n_draws;
  for (std::size_t sweep = 0; sweep < total_sweeps; ++sweep) {
    const bool adapting = sweep < config.n_warmup;
    for (std::size_t b = 0; b < n_blocks; ++b) {
      const auto& block = blocks[b];
      proposal = state;
      const double scale = std::exp(log_scales[b]);
      for (std::size_t k = block.offset; k < block.offset + block.size; ++k)
        proposal[k] += scale * rng.normal();
      const double proposed_density = target(proposal);
      const bool accept = proposed_density - log_density > std::log(rng.uniform());
      if (accept) {
        std::swap(state, proposal);
        log_density = proposed_density;
      }
      if (adapting) {
        const double gain =
            config.adapt_rate / std::pow(static_cast<double>(sweep) + 1.0, config.adapt_decay);
        log_scales[b] += gain * ((accept ? 1.0 : 0.0) - config.target_acceptance);
      } else if (accept) {
        ++accepts[b];
      }
    }
    if (!adapting) {
      result.draws.push_back(state);
      result.log_densities.push_back(log_density);
    }
  }

  result.acceptance_rates.resize(n_blocks);
  result.step_scales.resize(n_blocks);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    result.acceptance_rates[b] =
        static_cast<double>(accepts[b]) / static_cast<double>(config.n_draws);
    result.step_scales[b] = std::exp(log_scales[b]);
  }
  return result;
}

// Runs all chains concurrently. Chain i draws from stream member i of the
// base seed; results are returned in chain order regardless of scheduling.
// `init_fn(chain, rng)` proposes starting points; points with non-finite
// density are rejected and redrawn up to max_init_attempts times.
template <typename Target, typename InitFn>
std::vector<ChainResult> sample_chains(const Target& target,
                                       std::span<const ParameterBlock> blocks,
                                       const SamplerConfig& config, InitFn&& init_fn) {
  config.validate();
  std::vector<ChainResult> results(config.n_chains);
  std::vector<std::exception_ptr> failures(config.n_chains);
  {
    std::vector<std::jthread> workers;
    workers.reserve(config.n_chains);
    for (std::size_t chain = 0; chain < config.n_chains; ++chain) {
      workers.emplace_back([&, chain] {
        try {
          Rng rng(stream_seed(config.base_seed, chain));
          std::vector<double> init;
          bool found = false;
          for (std::size_t attempt = 0; attempt < config.max_init_attempts && !found; ++attempt) {
            init = init_fn(chain, rng);
            found = std::isfinite(target(init));
          }
          if (!found)
            throw NonFiniteDensity("chain " + std::to_string(chain) +
                                   ": no finite initial density after " +
                                   std::to_string(config.max_init_attempts) + " attempts");
          results[chain] = run_chain(target, blocks, config, std::move(init), std::move(rng));
        } catch (...) {
          failures[chain] = std::current_exception();
        }
      });
    }
  }
  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);
  return results;
}

// ---------------------------------------------------------------------------
// Model-level fit: constrained draws plus everything needed to reproduce and
// diagnose the run.

struct ChainSamples {
  std::vector<ModelParams> draws;
  std::vector<double> log_densities;
  std::vector<double> acceptance_rates;
  std::vector<double> step_scales;
};

struct PosteriorSamples {
  ModelConfig model;
  SamplerConfig sampler;
  std::size_t n_providers = 0;
  std::string dataset_fingerprint;
  std::vector<std::string> block_names;
  std::vector<ChainSamples> chains;

  std::size_t n_total_draws() const {
    std::size_t total = 0;
    for (const auto& chain : chains) total += chain.draws.size();
    return total;
  }

  // Pooled draw q in chain-major order; prediction cycles through these.
  const ModelParams& pooled_draw(std::size_t q) const {
    for (const auto& chain : chains) {
      if (q < chain.draws.size()) return chain.draws[q];
      q -= chain.draws.size();
    }
    throw DomainError("pooled_draw: index out of range");
  }

  // Per-chain series of a scalar summary, for convergence diagnostics.
  std::vector<std::vector<double>> scalar_series(
      const std::function<double(const ModelParams&)>& extract) const {
    std::vector<std::vector<double>> series(chains.size());
    for (std::size_t c = 0; c < chains.size(); ++c) {
      series[c].reserve(chains[c].draws.size());
      for (const auto& draw : chains[c].draws) series[c].push_back(extract(draw));
    }
    return series;
  }
};

inline PosteriorSamples run_chains(const ModelConfig& model_config, const Dataset& data,
                                   const SamplerConfig& sampler_config) {
  PosteriorDensity posterior(model_config, data);
  auto blocks = posterior.blocks();
  auto raw = sample_chains(posterior, blocks, sampler_config,
                           [&](std::size_t, Rng& rng) {
                             return initial_unconstrained(model_config, data.n_providers, rng);
                           });

  PosteriorSamples samples;
  samples.model = model_config;
  samples.sampler = sampler_config;
  samples.n_providers = data.n_providers;
  samples.dataset_fingerprint = dataset_fingerprint(data);
  for (const auto& block : blocks) samples.block_names.push_back(block.name);
  samples.chains.reserve(raw.size());
  for (auto& chain : raw) {
    ChainSamples converted;
    converted.log_densities = std::move(chain.log_densities);
    converted.acceptance_rates = std::move(chain.acceptance_rates);
    converted.step_scales = std::move(chain.step_scales);
    converted.draws.reserve(chain.draws.size());
    for (const auto& z : chain.draws)
      converted.draws.push_back(from_unconstrained(model_config, data.n_providers, z).params);
    samples.chains.push_back(std::move(converted));
  }
  return samples;
}

}  // namespace cluster
