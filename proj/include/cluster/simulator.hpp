#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cluster/errors.hpp"
#include "cluster/rng.hpp"

namespace cluster {

using Point = std::array<double, 2>;

// Synthetic-population generator settings. toggle_period is the number of
// sampling steps per recorded interval; availability is redrawn every
// toggle_steps steps (0 means once per interval, which makes the recorded
// availability binary).
struct ScenarioConfig {
  std::size_t n_providers = 10;
  std::size_t n_users = 100;
  double mobility_scale = 0.5;   // half-normal scale of per-user volatility
  double reversion_scale = 1.0;  // half-normal scale of per-user reversion rate
  double on_probability = 0.5;
  std::size_t toggle_period = 8;
  std::size_t toggle_steps = 0;
  std::size_t total_steps = 1600;
  double dt = 0.5;
  std::uint64_t seed = 1;

  std::size_t redraw_every() const {
    return toggle_steps == 0 ? toggle_period : toggle_steps;
  }
  std::size_t n_records() const { return total_steps / toggle_period; }

  void validate() const {
    if (n_providers < 1) throw ConfigError("scenario: n_providers must be at least 1");
    if (n_users < 1) throw ConfigError("scenario: n_users must be at least 1");
    if (!(mobility_scale > 0.0)) throw ConfigError("scenario: mobility_scale must be positive");
    if (!(reversion_scale > 0.0)) throw ConfigError("scenario: reversion_scale must be positive");
    if (!(on_probability > 0.0) || !(on_probability < 1.0))
      throw ConfigError("scenario: on_probability must lie strictly inside (0, 1)");
    if (toggle_period < 1) throw ConfigError("scenario: toggle_period must be at least 1");
    if (total_steps < 1 || total_steps % toggle_period != 0)
      throw ConfigError("scenario: total_steps must be a positive multiple of toggle_period");
    if (toggle_period % redraw_every() != 0)
      throw ConfigError("scenario: toggle_steps must divide toggle_period");
    if (!(dt > 0.0)) throw ConfigError("scenario: dt must be positive");
  }
};

// A concrete world: provider sites, user homes, and per-user mobility
// parameters. All positions lie in the unit square; sigma and theta are
// strictly positive.
struct Scenario {
  std::vector<Point> provider_positions;
  std::vector<Point> homes;
  std::vector<double> sigma;
  std::vector<double> theta;
};

struct DatasetRecord {
  std::vector<double> availability;  // mean on-fraction per provider, in [0, 1]
  std::vector<double> loads;         // mean connected users per provider, >= 0
  double total = 0.0;                // declared sum of loads
};

struct Dataset {
  std::size_t n_providers = 0;
  double total_load = 0.0;
  std::vector<DatasetRecord> records;
};

// Checks the documented dataset invariants. `load_tol` is the accepted
// absolute deviation between a record's load sum and its declared total.
inline void validate_dataset(const Dataset& data, double load_tol = 1e-6) {
  if (data.n_providers < 1) throw InvariantError("dataset: no providers");
  if (data.records.empty()) throw InvariantError("dataset: no records");
  for (std::size_t r = 0; r < data.records.size(); ++r) {
    const auto& rec = data.records[r];
    const std::string where = "dataset record " + std::to_string(r + 1);
    if (rec.availability.size() != data.n_providers || rec.loads.size() != data.n_providers)
      throw InvariantError(where + ": wrong provider count");
    double load_sum = 0.0;
    double avail_sum = 0.0;
    for (std::size_t i = 0; i < data.n_providers; ++i) {
      double u = rec.availability[i];
      double x = rec.loads[i];
      if (!std::isfinite(u) || u < 0.0 || u > 1.0)
        throw InvariantError(where + ": availability outside [0, 1]");
      if (!std::isfinite(x) || x < 0.0) throw InvariantError(where + ": negative load");
      load_sum += x;
      avail_sum += u;
    }
    if (!(avail_sum > 0.0)) throw InvariantError(where + ": no provider ever available");
    if (std::abs(load_sum - rec.total) > load_tol)
      throw InvariantError(where + ": loads sum to " + std::to_string(load_sum) +
                           ", declared total is " + std::to_string(rec.total));
  }
}

inline Scenario generate_scenario(const ScenarioConfig& config) {
  config.validate();
  Rng rng(stream_seed(config.seed, 1));
  Scenario scenario;
  scenario.provider_positions.resize(config.n_providers);
  for (auto& pos : scenario.provider_positions) pos = {rng.uniform(), rng.uniform()};
  scenario.homes.resize(config.n_users);
  scenario.sigma.resize(config.n_users);
  scenario.theta.resize(config.n_users);
  for (std::size_t j = 0; j < config.n_users; ++j) {
    scenario.homes[j] = {rng.uniform(), rng.uniform()};
    double s, t;
    // Half-normal scales are almost surely positive; reject the measure-zero
    // exact zeros so the Scenario invariant holds unconditionally.
    do s = rng.half_normal(config.mobility_scale); while (!(s > 0.0));
    do t = rng.half_normal(config.reversion_scale); while (!(t > 0.0));
    scenario.sigma[j] = s;
    scenario.theta[j] = t;
  }
  return scenario;
}

// One exact Ornstein-Uhlenbeck step toward `home`:
//   p' = mu + (p - mu) e^{-theta dt} + sigma sqrt((1 - e^{-2 theta dt}) / (2 theta)) eps
// Exact discretisation: the step size dt only changes the time grid, not the
// law of the process. sigma = 0 degenerates to deterministic decay.
inline Point ou_step(Point position, Point home, double sigma, double theta, double dt, Rng& rng) {
  if (!(theta > 0.0)) throw DomainError("ou_step: theta must be positive");
  if (sigma < 0.0) throw DomainError("ou_step: sigma must be non-negative");
  if (!(dt > 0.0)) throw DomainError("ou_step: dt must be positive");
  double decay = std::exp(-theta * dt);
  double noise_sd = sigma * std::sqrt((1.0 - decay * decay) / (2.0 * theta));
  Point next;
  for (int axis = 0; axis < 2; ++axis) {
    double step_noise = noise_sd > 0.0 ? noise_sd * rng.normal() : 0.0;
    next[axis] = home[axis] + (position[axis] - home[axis]) * decay + step_noise;
  }
  return next;
}

// Advances every user one step. Positions are not confined to the unit
// square; reversion keeps them near their homes.
inline void step_users(const Scenario& scenario, std::vector<Point>& positions, double dt,
                       Rng& rng) {
  if (positions.size() != scenario.homes.size())
    throw DimensionMismatch("step_users: position count does not match user count");
  for (std::size_t j = 0; j < positions.size(); ++j)
    positions[j] =
        ou_step(positions[j], scenario.homes[j], scenario.sigma[j], scenario.theta[j], dt, rng);
}

// Per-step on/off states, one row per sampling step. States are redrawn
// Bernoulli(on_probability) every redraw_every() steps and held in between;
// all-off draws are rejected so every step keeps at least one provider on.
inline std::vector<std::vector<std::uint8_t>> availability_schedule(const ScenarioConfig& config,
                                                                    Rng& rng) {
  config.validate();
  std::vector<std::vector<std::uint8_t>> schedule(
      config.total_steps, std::vector<std::uint8_t>(config.n_providers, 0));
  const std::size_t redraw = config.redraw_every();
  std::vector<std::uint8_t> state(config.n_providers, 0);
  for (std::size_t step = 0; step < config.total_steps; ++step) {
    if (step % redraw == 0) {
      bool any_on = false;
      do {
        any_on = false;
        for (std::size_t i = 0; i < config.n_providers; ++i) {
          state[i] = rng.bernoulli(config.on_probability) ? 1 : 0;
          any_on = any_on || state[i] != 0;
        }
      } while (!any_on);
    }
    schedule[step] = state;
  }
  return schedule;
}

// Index of the nearest active provider; ties break toward the lowest index.
inline std::size_t nearest_active_provider(const std::vector<Point>& providers,
                                           const std::vector<std::uint8_t>& active,
                                           Point position) {
  if (providers.size() != active.size())
    throw DimensionMismatch("nearest_active_provider: provider/state count mismatch");
  std::size_t best = providers.size();
  double best_d2 = 0.0;
  for (std::size_t i = 0; i < providers.size(); ++i) {
    if (!active[i]) continue;
    double dx = providers[i][0] - position[0];
    double dy = providers[i][1] - position[1];
    double d2 = dx * dx + dy * dy;
    if (best == providers.size() || d2 < best_d2) {
      best = i;
      best_d2 = d2;
    }
  }
  if (best == providers.size())
    throw EmptyActiveSet("nearest_active_provider: no provider is active");
  return best;
}

// Core recording loop over a prebuilt world and schedule. Users start at
// their homes, move one OU step, then connect to the nearest active
// provider; per-interval means of connections and on-states form one record.
inline Dataset simulate_records(const Scenario& scenario, const ScenarioConfig& config,
                                const std::vector<std::vector<std::uint8_t>>& schedule, Rng& rng) {
  config.validate();
  if (schedule.size() != config.total_steps)
    throw DimensionMismatch("simulate_records: schedule length does not match total_steps");
  const std::size_t n = config.n_providers;
  const std::size_t interval = config.toggle_period;
  Dataset data;
  data.n_providers = n;
  data.total_load = static_cast<double>(config.n_users);
  data.records.reserve(config.n_records());

  std::vector<Point> positions = scenario.homes;
  std::vector<std::int64_t> connect_counts(n, 0);
  std::vector<std::int64_t> on_counts(n, 0);
  for (std::size_t step = 0; step < config.total_steps; ++step) {
    const auto& active = schedule[step];
    if (active.size() != n) throw DimensionMismatch("simulate_records: schedule row width");
    step_users(scenario, positions, config.dt, rng);
    for (std::size_t j = 0; j < positions.size(); ++j)
      ++connect_counts[nearest_active_provider(scenario.provider_positions, active, positions[j])];
    for (std::size_t i = 0; i < n; ++i) on_counts[i] += active[i];

    if ((step + 1) % interval == 0) {
      DatasetRecord record;
      record.availability.resize(n);
      record.loads.resize(n);
      double steps = static_cast<double>(interval);
      for (std::size_t i = 0; i < n; ++i) {
        record.availability[i] = static_cast<double>(on_counts[i]) / steps;
        record.loads[i] = static_cast<double>(connect_counts[i]) / steps;
      }
      record.total = data.total_load;
      data.records.push_back(std::move(record));
      std::fill(connect_counts.begin(), connect_counts.end(), 0);
      std::fill(on_counts.begin(), on_counts.end(), 0);
    }
  }
  validate_dataset(data);
  return data;
}

// Full pipeline: world, schedule, and trajectories each consume their own
// stream of the configured seed, so regenerating any part is reproducible.
inline Dataset run_simulation(const ScenarioConfig& config) {
  config.validate();
  Scenario scenario = generate_scenario(config);
  Rng schedule_rng(stream_seed(config.seed, 2));
  auto schedule = availability_schedule(config, schedule_rng);
  Rng movement_rng(stream_seed(config.seed, 3));
  return simulate_records(scenario, config, schedule, movement_rng);
}

}  // namespace cluster
