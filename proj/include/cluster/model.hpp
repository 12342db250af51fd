#pragma once

#include <cfenv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cluster/distributions.hpp"
#include "cluster/errors.hpp"
#include "cluster/rng.hpp"
#include "cluster/simplex.hpp"
#include "cluster/simulator.hpp"
#include "cluster/transform.hpp"

namespace cluster {

enum class ModelVariant { Naive, Complete };
enum class LikelihoodKind { Dirichlet, Multinomial };

inline std::string to_string(ModelVariant v) {
  return v == ModelVariant::Naive ? "naive" : "complete";
}
inline std::string to_string(LikelihoodKind k) {
  return k == LikelihoodKind::Dirichlet ? "dirichlet" : "multinomial";
}

inline ModelVariant model_variant_from_string(const std::string& name) {
  if (name == "naive") return ModelVariant::Naive;
  if (name == "complete") return ModelVariant::Complete;
  throw ConfigError("unknown model variant: " + name);
}

inline LikelihoodKind likelihood_from_string(const std::string& name) {
  if (name == "dirichlet") return LikelihoodKind::Dirichlet;
  if (name == "multinomial") return LikelihoodKind::Multinomial;
  throw ConfigError("unknown likelihood: " + name);
}

// Mixture model over latent preference clusters.
//   naive:    w ~ Dirichlet(1_W), rows of L ~ Dirichlet(1_N), c ~ Gamma(a, b)
//   complete: alpha ~ Gamma(c, d), beta_j ~ Beta(1, alpha), w stick-breaking,
//             rows of L ~ Dirichlet(1_N), c ~ Gamma(a, b)
// Hyperparameter names follow the config-file keys: a, b are the Gamma
// shape/rate on the concentration, c, d the Gamma shape/rate on alpha.
struct ModelConfig {
  ModelVariant variant = ModelVariant::Complete;
  LikelihoodKind likelihood = LikelihoodKind::Dirichlet;
  std::size_t n_clusters = 20;       // truncation level W
  double concentration_shape = 2.0;  // a
  double concentration_rate = 0.02;  // b (mean a/b = 100)
  double dp_shape = 2.0;             // c
  double dp_rate = 1.0;              // d (mean c/d = 2)
  double boundary_clamp = 1e-9;      // eps_clamp

  void validate() const {
    if (n_clusters < 1) throw ConfigError("model: W must be at least 1");
    if (!(concentration_shape > 0.0) || !(concentration_rate > 0.0))
      throw ConfigError("model: a and b must be positive");
    if (!(dp_shape > 0.0) || !(dp_rate > 0.0)) throw ConfigError("model: c and d must be positive");
    if (!(boundary_clamp > 0.0) || !(boundary_clamp < 1e-3))
      throw ConfigError("model: eps_clamp must lie in (0, 1e-3)");
  }
};

// Parameter state in constrained space. `weights` is used by the naive
// variant only; the complete variant derives weights from `fractions`.
struct ModelParams {
  double concentration = 1.0;                    // c > 0
  double dp_scale = 1.0;                         // alpha > 0 (complete)
  std::vector<double> fractions;                 // beta in (0,1)^W (complete)
  std::vector<double> weights;                   // W-simplex (naive)
  std::vector<std::vector<double>> preferences;  // W rows on the N-simplex
};

struct MixtureWeights {
  std::vector<double> simplex;  // sums to 1; feeds proportion_vector
  std::vector<double> raw;      // retained stick weights, sum 1 - remainder
  double remainder = 0.0;
};

// Cluster weights on the simplex. The complete variant keeps the truncated
// stick weights (raw) for truncation diagnostics and renormalises them for
// the likelihood, which conditions membership on the retained clusters.
inline MixtureWeights mixture_weights(const ModelConfig& config, const ModelParams& params) {
  MixtureWeights w;
  if (config.variant == ModelVariant::Naive) {
    w.raw = params.weights;
    w.simplex = params.weights;
    w.remainder = 0.0;
    return w;
  }
  auto sb = stick_breaking(params.fractions);
  w.raw = sb.weights;
  w.remainder = sb.remainder;
  w.simplex = normalize(sb.weights);
  return w;
}

inline double log_prior(const ModelConfig& config, const ModelParams& params) {
  config.validate();
  const std::size_t n_clusters = config.n_clusters;
  if (params.preferences.size() != n_clusters)
    throw DimensionMismatch("log_prior: preference row count does not match W");
  const std::size_t n = params.preferences.front().size();
  double lp = gamma_log_pdf(params.concentration, config.concentration_shape,
                            config.concentration_rate);
  std::vector<double> flat(n, 1.0);
  for (const auto& row : params.preferences) lp += dirichlet_log_density(row, flat);
  if (config.variant == ModelVariant::Naive) {
    if (params.weights.size() != n_clusters)
      throw DimensionMismatch("log_prior: weight count does not match W");
    lp += dirichlet_log_density(params.weights, std::vector<double>(n_clusters, 1.0));
  } else {
    if (params.fractions.size() != n_clusters)
      throw DimensionMismatch("log_prior: fraction count does not match W");
    lp += gamma_log_pdf(params.dp_scale, config.dp_shape, config.dp_rate);
    for (double b : params.fractions) lp += beta_log_pdf(b, 1.0, params.dp_scale);
  }
  return lp;
}

// Model proportion vector for an availability profile, clamped strictly
// inside the full simplex so multinomial evaluation and predictive sampling
// never see zero parameters. The Dirichlet likelihood instead restricts
// itself to the available sub-simplex.
inline std::vector<double> model_proportions(const ModelConfig& config, const ModelParams& params,
                                             std::span<const double> availability) {
  auto w = mixture_weights(config, params);
  auto p = proportion_vector(params.preferences, w.simplex, availability);
  return clamp_to_interior(p, config.boundary_clamp);
}

// Integer counts whose sum matches the rounded total. Components round
// half-to-even first; any leftover is apportioned by largest remainder
// (ties toward the lowest index) so the multinomial support constraint holds.
inline std::vector<std::int64_t> load_counts(std::span<const double> loads, double total) {
  std::fesetround(FE_TONEAREST);
  auto target = static_cast<std::int64_t>(std::nearbyint(total));
  std::vector<std::int64_t> counts(loads.size());
  std::int64_t sum = 0;
  for (std::size_t i = 0; i < loads.size(); ++i) {
    if (loads[i] < 0.0) throw DomainError("load_counts: negative load");
    counts[i] = static_cast<std::int64_t>(std::nearbyint(loads[i]));
    sum += counts[i];
  }
  while (sum != target) {
    std::int64_t direction = target > sum ? 1 : -1;
    std::size_t pick = loads.size();
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < loads.size(); ++i) {
      if (direction < 0 && counts[i] == 0) continue;
      double gain = direction * (loads[i] - static_cast<double>(counts[i]));
      if (gain > best) {
        best = gain;
        pick = i;
      }
    }
    if (pick == loads.size()) throw DomainError("load_counts: cannot match rounded total");
    counts[pick] += direction;
    sum += direction;
  }
  return counts;
}

inline double log_likelihood_record(const ModelConfig& config, const ModelParams& params,
                                    const DatasetRecord& record) {
  if (config.likelihood == LikelihoodKind::Dirichlet) {
    // p_i = 0 wherever u_i = 0, so the Dirichlet law is degenerate there and
    // its density lives on the sub-simplex of available providers. A record
    // with a single available provider is a point mass and carries no
    // information.
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < record.availability.size(); ++i)
      if (record.availability[i] > 0.0) active.push_back(i);

    auto w = mixture_weights(config, params);
    auto p = proportion_vector(params.preferences, w.simplex, record.availability);
    if (active.size() < 2) return 0.0;

    double observed_total = 0.0;
    for (std::size_t i : active) observed_total += record.loads[i];
    if (!(observed_total > 0.0)) throw DomainError("log_likelihood_record: record with zero load");
    std::vector<double> observed(active.size()), restricted(active.size());
    for (std::size_t k = 0; k < active.size(); ++k) {
      observed[k] = record.loads[active[k]] / observed_total;
      restricted[k] = p[active[k]];
    }
    observed = clamp_to_interior(observed, config.boundary_clamp);
    restricted = clamp_to_interior(restricted, config.boundary_clamp);
    for (double& a : restricted) a *= params.concentration;
    return dirichlet_log_density(observed, restricted);
  }
  auto proportions = model_proportions(config, params, record.availability);
  auto counts = load_counts(record.loads, record.total);
  return multinomial_log_pmf(counts, proportions);
}

inline double log_likelihood(const ModelConfig& config, const ModelParams& params,
                             const Dataset& data) {
  double total = 0.0;
  for (const auto& record : data.records) total += log_likelihood_record(config, params, record);
  return total;
}

// Log posterior density in constrained space (no transform Jacobians).
inline double log_posterior_constrained(const ModelConfig& config, const ModelParams& params,
                                        const Dataset& data) {
  return log_prior(config, params) + log_likelihood(config, params, data);
}

// ---------------------------------------------------------------------------
// Unconstrained parameterisation. Layout:
//   naive:    [ log c | weight transform (W-1) | W preference rows (N-1 each) ]
//   complete: [ log c | log alpha | logit beta (W) | W preference rows ]
// Sampler blocks follow the same boundaries: scalars, the weight/fraction
// vector, then one block per preference row.

struct ParameterBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

inline std::size_t unconstrained_dim(const ModelConfig& config, std::size_t n_providers) {
  const std::size_t rows = config.n_clusters * (n_providers - 1);
  if (config.variant == ModelVariant::Naive) return 1 + (config.n_clusters - 1) + rows;
  return 2 + config.n_clusters + rows;
}

inline std::vector<ParameterBlock> parameter_blocks(const ModelConfig& config,
                                                    std::size_t n_providers) {
  if (n_providers < 2) throw ConfigError("model: need at least 2 providers");
  std::vector<ParameterBlock> blocks;
  std::size_t offset = 0;
  blocks.push_back({"concentration", offset, 1});
  offset += 1;
  if (config.variant == ModelVariant::Complete) {
    blocks.push_back({"dp_scale", offset, 1});
    offset += 1;
    // One block per stick fraction: leading sticks are data-pinned while
    // trailing sticks are prior-dominated, so a shared proposal scale would
    // leave the tail critically slow to mix.
    for (std::size_t j = 0; j < config.n_clusters; ++j) {
      blocks.push_back({"fractions[" + std::to_string(j) + "]", offset, 1});
      offset += 1;
    }
  } else if (config.n_clusters > 1) {
    blocks.push_back({"weights", offset, config.n_clusters - 1});
    offset += config.n_clusters - 1;
  }
  for (std::size_t j = 0; j < config.n_clusters; ++j) {
    blocks.push_back({"preferences[" + std::to_string(j) + "]", offset, n_providers - 1});
    offset += n_providers - 1;
  }
  return blocks;
}

inline std::vector<double> to_unconstrained(const ModelConfig& config, const ModelParams& params) {
  std::vector<double> z;
  z.reserve(unconstrained_dim(config, params.preferences.front().size()));
  z.push_back(positive_to_unconstrained(params.concentration));
  if (config.variant == ModelVariant::Complete) {
    z.push_back(positive_to_unconstrained(params.dp_scale));
    for (double b : params.fractions) z.push_back(unit_to_unconstrained(b));
  } else if (config.n_clusters > 1) {
    auto y = simplex_to_unconstrained(params.weights);
    z.insert(z.end(), y.begin(), y.end());
  }
  for (const auto& row : params.preferences) {
    auto y = simplex_to_unconstrained(row);
    z.insert(z.end(), y.begin(), y.end());
  }
  return z;
}

struct UnpackedParams {
  ModelParams params;
  double log_jacobian = 0.0;
};

inline UnpackedParams from_unconstrained(const ModelConfig& config, std::size_t n_providers,
                                         std::span<const double> z) {
  if (z.size() != unconstrained_dim(config, n_providers))
    throw DimensionMismatch("from_unconstrained: wrong coordinate count");
  UnpackedParams out;
  std::size_t pos = 0;
  auto conc = positive_from_unconstrained(z[pos++]);
  out.params.concentration = conc.value;
  out.log_jacobian += conc.log_jacobian;
  if (config.variant == ModelVariant::Complete) {
    auto scale = positive_from_unconstrained(z[pos++]);
    out.params.dp_scale = scale.value;
    out.log_jacobian += scale.log_jacobian;
    out.params.fractions.resize(config.n_clusters);
    for (std::size_t j = 0; j < config.n_clusters; ++j) {
      auto frac = unit_from_unconstrained(z[pos++]);
      out.params.fractions[j] = frac.value;
      out.log_jacobian += frac.log_jacobian;
    }
  } else if (config.n_clusters > 1) {
    auto w = simplex_from_unconstrained(z.subspan(pos, config.n_clusters - 1));
    pos += config.n_clusters - 1;
    out.params.weights = std::move(w.value);
    out.log_jacobian += w.log_jacobian;
  } else {
    out.params.weights = {1.0};
  }
  out.params.preferences.resize(config.n_clusters);
  for (std::size_t j = 0; j < config.n_clusters; ++j) {
    auto row = simplex_from_unconstrained(z.subspan(pos, n_providers - 1));
    pos += n_providers - 1;
    out.params.preferences[j] = std::move(row.value);
    out.log_jacobian += row.log_jacobian;
  }
  return out;
}

// Overdispersed chain start: scalars at their prior means, stick fractions
// at 1/2, simplex coordinates at the barycentre jittered per chain.
inline std::vector<double> initial_unconstrained(const ModelConfig& config,
                                                 std::size_t n_providers, Rng& rng) {
  const double jitter_sd = 0.5;
  std::vector<double> z(unconstrained_dim(config, n_providers), 0.0);
  std::size_t pos = 0;
  z[pos++] = std::log(config.concentration_shape / config.concentration_rate);
  if (config.variant == ModelVariant::Complete) {
    z[pos++] = std::log(config.dp_shape / config.dp_rate);
    pos += config.n_clusters;  // logit(1/2) = 0 for every fraction
  } else if (config.n_clusters > 1) {
    for (std::size_t k = 0; k + 1 < config.n_clusters; ++k) z[pos++] = jitter_sd * rng.normal();
  }
  while (pos < z.size()) z[pos++] = jitter_sd * rng.normal();
  return z;
}

// ---------------------------------------------------------------------------
// Posterior density over unconstrained coordinates, with per-record
// observation terms precomputed. Saturated coordinates (parameters rounding
// onto a constraint boundary in double precision) carry zero posterior mass
// and evaluate to -infinity rather than throwing.

class PosteriorDensity {
 public:
  PosteriorDensity(ModelConfig config, const Dataset& data)
      : config_(config), n_providers_(data.n_providers) {
    config_.validate();
    validate_dataset(data, 1e-3);
    records_.reserve(data.records.size());
    for (const auto& record : data.records) {
      RecordTerms terms;
      terms.availability = record.availability;
      for (std::size_t i = 0; i < record.availability.size(); ++i)
        if (record.availability[i] > 0.0) terms.active.push_back(i);
      if (config_.likelihood == LikelihoodKind::Dirichlet) {
        // Density on the sub-simplex of available providers; a record with
        // one available provider is a point mass and contributes nothing.
        if (terms.active.size() >= 2) {
          double total = 0.0;
          for (std::size_t i : terms.active) total += record.loads[i];
          if (!(total > 0.0)) throw InvariantError("posterior: record with zero total load");
          std::vector<double> observed(terms.active.size());
          for (std::size_t k = 0; k < observed.size(); ++k)
            observed[k] = record.loads[terms.active[k]] / total;
          observed = clamp_to_interior(observed, config_.boundary_clamp);
          terms.log_observed.resize(observed.size());
          for (std::size_t k = 0; k < observed.size(); ++k)
            terms.log_observed[k] = std::log(observed[k]);
        }
      } else {
        terms.counts = load_counts(record.loads, record.total);
        double lg = 0.0;
        std::int64_t total = 0;
        for (auto c : terms.counts) {
          total += c;
          lg -= log_gamma_fn(static_cast<double>(c) + 1.0);
        }
        terms.count_constant = lg + log_gamma_fn(static_cast<double>(total) + 1.0);
      }
      records_.push_back(std::move(terms));
    }
  }

  const ModelConfig& config() const { return config_; }
  std::size_t n_providers() const { return n_providers_; }
  std::size_t dim() const { return unconstrained_dim(config_, n_providers_); }
  std::vector<ParameterBlock> blocks() const { return parameter_blocks(config_, n_providers_); }
  std::size_t n_records() const { return records_.size(); }

  double operator()(std::span<const double> z) const {
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    try {
      auto unpacked = from_unconstrained(config_, n_providers_, z);
      if (!std::isfinite(unpacked.log_jacobian)) return neg_inf;
      double lp = log_prior(config_, unpacked.params) + unpacked.log_jacobian;
      if (!std::isfinite(lp)) return neg_inf;
      auto weights = mixture_weights(config_, unpacked.params);
      const auto& prefs = unpacked.params.preferences;
      const double concentration = unpacked.params.concentration;
      std::vector<double> proportions(n_providers_);
      std::vector<double> row_score(n_providers_);
      std::vector<double> active_p(n_providers_);
      for (const auto& record : records_) {
        std::fill(proportions.begin(), proportions.end(), 0.0);
        for (std::size_t j = 0; j < prefs.size(); ++j) {
          double mass = 0.0;
          for (std::size_t i = 0; i < n_providers_; ++i) {
            row_score[i] = prefs[j][i] * record.availability[i];
            mass += row_score[i];
          }
          if (!(mass > kSingularTol)) return neg_inf;
          double scaled_weight = weights.simplex[j] / mass;
          for (std::size_t i = 0; i < n_providers_; ++i)
            proportions[i] += scaled_weight * row_score[i];
        }
        if (config_.likelihood == LikelihoodKind::Dirichlet) {
          if (record.active.size() >= 2) {
            double clamp_total = 0.0;
            for (std::size_t k = 0; k < record.active.size(); ++k) {
              double p = proportions[record.active[k]];
              active_p[k] = p < config_.boundary_clamp ? config_.boundary_clamp : p;
              clamp_total += active_p[k];
            }
            lp += log_gamma_fn(concentration);
            for (std::size_t k = 0; k < record.active.size(); ++k) {
              double alpha = concentration * active_p[k] / clamp_total;
              lp += (alpha - 1.0) * record.log_observed[k] - log_gamma_fn(alpha);
            }
          }
        } else {
          double clamp_total = 0.0;
          for (double& p : proportions) {
            if (p < config_.boundary_clamp) p = config_.boundary_clamp;
            clamp_total += p;
          }
          lp += record.count_constant;
          for (std::size_t i = 0; i < n_providers_; ++i)
            if (record.counts[i] != 0)
              lp += static_cast<double>(record.counts[i]) *
                    std::log(proportions[i] / clamp_total);
        }
        if (!std::isfinite(lp)) return neg_inf;
      }
      return lp;
    } catch (const DomainError&) {
      return neg_inf;
    }
  }

 private:
  struct RecordTerms {
    std::vector<double> availability;
    std::vector<std::size_t> active;     // providers with u_i > 0
    std::vector<double> log_observed;    // Dirichlet likelihood, active subset
    std::vector<std::int64_t> counts;    // multinomial likelihood
    double count_constant = 0.0;
  };

  ModelConfig config_;
  std::size_t n_providers_;
  std::vector<RecordTerms> records_;
};

}  // namespace cluster
