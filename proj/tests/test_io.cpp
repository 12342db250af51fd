#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "cluster/config.hpp"
#include "cluster/dataset_io.hpp"
#include "cluster/diagnostics.hpp"
#include "cluster/posterior_io.hpp"
#include "cluster/sampler.hpp"
#include "cluster/simulator.hpp"

using namespace cluster;

namespace {

Dataset small_dataset(std::size_t n_providers = 3, std::size_t n_records = 12,
                      std::uint64_t seed = 11) {
  ScenarioConfig config;
  config.n_providers = n_providers;
  config.n_users = 25;
  config.total_steps = 100 * n_records;
  config.toggle_period = 100;
  config.seed = seed;
  return run_simulation(config);
}

PosteriorSamples small_posterior(const Dataset& data) {
  ModelConfig model;
  model.n_clusters = 4;
  SamplerConfig sampler;
  sampler.n_chains = 2;
  sampler.n_warmup = 150;
  sampler.n_draws = 60;
  sampler.base_seed = 3;
  return run_chains(model, data, sampler);
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("cluster_io_" + std::to_string(Catch::rngSeed()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("dataset csv parses the documented example", "[io]") {
  const std::string csv =
      "record,u_1,u_2,x_1,x_2,total\n"
      "1,1,1,40,60,100\n";
  const Dataset data = dataset_from_csv(csv);
  REQUIRE(data.n_providers == 2);
  REQUIRE(data.records.size() == 1);
  CHECK(data.records[0].availability == std::vector<double>{1.0, 1.0});
  CHECK(data.records[0].loads == std::vector<double>{40.0, 60.0});
  CHECK(data.records[0].total == 100.0);
}

TEST_CASE("dataset csv rejects conservation violations with the row", "[io]") {
  const std::string csv =
      "record,u_1,u_2,x_1,x_2,total\n"
      "1,1,1,40,60,100\n"
      "2,1,1,40,50,100\n";
  try {
    dataset_from_csv(csv);
    FAIL("expected InvariantError");
  } catch (const InvariantError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("dataset csv rejects malformed schema and values", "[io]") {
  CHECK_THROWS_AS(dataset_from_csv("record,u_1,x_1\n1,1,100\n"), SchemaError);
  CHECK_THROWS_AS(dataset_from_csv("record,a_1,u_2,x_1,x_2,total\n1,1,1,40,60,100\n"),
                  SchemaError);
  CHECK_THROWS_AS(dataset_from_csv("record,u_1,x_1,total\n1,frog,100,100\n"), ParseError);
  CHECK_THROWS_AS(dataset_from_csv("record,u_1,x_1,total\n1,1,100\n"), ParseError);
  CHECK_THROWS_AS(dataset_from_csv("record,u_1,x_1,total\n1,2,100,100\n"), InvariantError);
}

TEST_CASE("dataset save/load round trip is exact", "[io]") {
  TempDir dir;
  const Dataset data = small_dataset();
  const auto path = dir.path / "data.csv";
  save_dataset(path, data);
  const Dataset loaded = load_dataset(path);

  REQUIRE(loaded.n_providers == data.n_providers);
  REQUIRE(loaded.records.size() == data.records.size());
  for (std::size_t r = 0; r < data.records.size(); ++r) {
    CHECK(loaded.records[r].availability == data.records[r].availability);
    CHECK(loaded.records[r].loads == data.records[r].loads);
    CHECK(loaded.records[r].total == data.records[r].total);
  }
  CHECK(dataset_fingerprint(loaded) == dataset_fingerprint(data));
  CHECK(fnv1a64_hex(read_file(path)) == dataset_fingerprint(data));
}

TEST_CASE("posterior round trip preserves draws and diagnostics", "[io]") {
  TempDir dir;
  const Dataset data = small_dataset();
  const PosteriorSamples samples = small_posterior(data);
  const auto path = dir.path / "post.ndjson";
  const json manifest = make_manifest("infer", json::object(), json::object(), json::object());
  save_posterior(samples, path.string(), manifest);

  const LoadedPosterior loaded = load_posterior(path.string());
  const auto& got = loaded.samples;
  REQUIRE(got.chains.size() == samples.chains.size());
  REQUIRE(got.n_providers == samples.n_providers);
  CHECK(got.dataset_fingerprint == samples.dataset_fingerprint);
  CHECK(got.block_names == samples.block_names);
  CHECK(to_json(got.model) == to_json(samples.model));
  CHECK(to_json(got.sampler) == to_json(samples.sampler));

  for (std::size_t c = 0; c < samples.chains.size(); ++c) {
    REQUIRE(got.chains[c].draws.size() == samples.chains[c].draws.size());
    CHECK(got.chains[c].acceptance_rates == samples.chains[c].acceptance_rates);
    CHECK(got.chains[c].step_scales == samples.chains[c].step_scales);
    for (std::size_t q = 0; q < samples.chains[c].draws.size(); ++q) {
      const auto& a = samples.chains[c].draws[q];
      const auto& b = got.chains[c].draws[q];
      CHECK(std::abs(a.concentration - b.concentration) <=
            1e-12 * std::abs(a.concentration));
      CHECK(std::abs(a.dp_scale - b.dp_scale) <= 1e-12 * std::abs(a.dp_scale));
      REQUIRE(b.preferences.size() == a.preferences.size());
      for (std::size_t j = 0; j < a.preferences.size(); ++j)
        for (std::size_t i = 0; i < a.preferences[j].size(); ++i)
          CHECK(std::abs(a.preferences[j][i] - b.preferences[j][i]) <= 1e-12);
    }
  }

  const auto extract = [](const ModelParams& p) { return p.concentration; };
  CHECK(std::abs(split_r_hat(got.scalar_series(extract)) -
                 split_r_hat(samples.scalar_series(extract))) <= 1e-9);
  CHECK(loaded.manifest.at("command") == "infer");
  CHECK(std::filesystem::exists(path.string() + ".manifest.json"));
}

TEST_CASE("posterior loader reports truncation with a line number", "[io]") {
  TempDir dir;
  const Dataset data = small_dataset();
  const PosteriorSamples samples = small_posterior(data);
  const std::string text =
      posterior_to_ndjson(samples, make_manifest("infer", {}, {}, {}));

  SECTION("file cut mid-line") {
    const std::size_t line_start = text.rfind('\n', text.size() * 2 / 3) + 1;
    const std::size_t line_end = text.find('\n', line_start);
    const std::string cut = text.substr(0, line_start + (line_end - line_start) / 2);
    const std::size_t n_lines = std::count(cut.begin(), cut.end(), '\n') + 1;
    try {
      posterior_from_ndjson(cut);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line " + std::to_string(n_lines)) != std::string::npos);
    }
  }

  SECTION("file cut at a line boundary") {
    const std::size_t keep = text.find('\n', text.size() / 2) + 1;
    try {
      posterior_from_ndjson(text.substr(0, keep));
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line") != std::string::npos);
      CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
  }

  SECTION("garbled header") {
    CHECK_THROWS_AS(posterior_from_ndjson("{not json\n"), ParseError);
    CHECK_THROWS_AS(posterior_from_ndjson(""), ParseError);
  }
}

TEST_CASE("posterior loader rejects foreign formats and versions", "[io]") {
  const Dataset data = small_dataset();
  const PosteriorSamples samples = small_posterior(data);
  std::string text = posterior_to_ndjson(samples, make_manifest("infer", {}, {}, {}));

  SECTION("version bump") {
    const std::string tag = "\"version\":1";
    text.replace(text.find(tag), tag.size(), "\"version\":99");
    CHECK_THROWS_AS(posterior_from_ndjson(text), VersionError);
  }

  SECTION("wrong format tag") {
    const std::string tag = "cluster-posterior";
    text.replace(text.find(tag), tag.size(), "cluster-somethidg");
    CHECK_THROWS_AS(posterior_from_ndjson(text), SchemaError);
  }
}

TEST_CASE("predictive round trip preserves draws and counters", "[io]") {
  TempDir dir;
  const Dataset data = small_dataset();
  const PosteriorSamples samples = small_posterior(data);

  std::vector<PredictiveSamples> predictions;
  for (std::size_t r = 0; r < 3; ++r) {
    auto pred = draw_predictive(samples, data.records[r].availability, data.records[r].total,
                                40, stream_seed(17, r));
    pred.scenario = r;
    predictions.push_back(std::move(pred));
  }

  const auto path = dir.path / "pred.ndjson";
  save_predictive(predictions, path.string(), make_manifest("predict", {}, {}, {}));
  const LoadedPredictive loaded = load_predictive(path.string());

  REQUIRE(loaded.predictions.size() == predictions.size());
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const auto& a = predictions[k];
    const auto& b = loaded.predictions[k];
    CHECK(b.scenario == a.scenario);
    CHECK(b.availability == a.availability);
    CHECK(b.total == a.total);
    CHECK(b.rejected == a.rejected);
    CHECK(b.clamped == a.clamped);
    REQUIRE(b.draws.size() == a.draws.size());
    for (std::size_t q = 0; q < a.draws.size(); ++q)
      for (std::size_t i = 0; i < a.draws[q].size(); ++i)
        CHECK(std::abs(a.draws[q][i] - b.draws[q][i]) <= 1e-12 * a.total);
  }

  SECTION("missing scenarios are reported as truncation") {
    std::string text = read_file(path);
    const std::size_t second = text.find("\"availability\"", text.find("\"availability\"") + 1);
    const std::size_t cut = text.rfind('\n', second);
    CHECK_THROWS_AS(predictive_from_ndjson(text.substr(0, cut + 1)), ParseError);
  }
}

TEST_CASE("config parser honours exact field names and comments", "[io]") {
  const PipelineConfig config = parse_config(
      "# scenario\n"
      "n_providers = 6\n"
      "n_users = 42\n"
      "mobility_scale = 0.2  # trailing comment\n"
      "total_steps = 1000\n"
      "toggle_period = 50\n"
      "seed = 99\n"
      "\n"
      "variant = naive\n"
      "likelihood = multinomial\n"
      "n_clusters = 7\n"
      "\n"
      "n_chains = 3\n"
      "n_draws = 500\n"
      "base_seed = 5\n");
  CHECK(config.scenario.n_providers == 6);
  CHECK(config.scenario.n_users == 42);
  CHECK(config.scenario.mobility_scale == 0.2);
  CHECK(config.scenario.total_steps == 1000);
  CHECK(config.scenario.seed == 99);
  CHECK(config.model.variant == ModelVariant::Naive);
  CHECK(config.model.likelihood == LikelihoodKind::Multinomial);
  CHECK(config.model.n_clusters == 7);
  CHECK(config.sampler.n_chains == 3);
  CHECK(config.sampler.n_draws == 500);
  CHECK(config.sampler.base_seed == 5);
  CHECK(config.sampler.n_warmup == SamplerConfig{}.n_warmup);
}

TEST_CASE("config parser rejects unknown, duplicate, and malformed keys", "[io]") {
  CHECK_THROWS_AS(parse_config("n_provider = 6\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("n_users = 10\nn_users = 12\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("n_users\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("n_users = ten\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("variant = bayesian\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("n_users = 0\n"), ConfigError);
  try {
    parse_config("n_users = 10\nbogus = 1\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
}

TEST_CASE("manifest serialisation and atomic writes are deterministic", "[io]") {
  TempDir dir;
  const json a = make_manifest("simulate", json{{"n", 1}}, json::object(), json{{"seed", 4}});
  const json b = make_manifest("simulate", json{{"n", 1}}, json::object(), json{{"seed", 4}});
  CHECK(a.dump() == b.dump());

  const auto artifact = dir.path / "artifact.txt";
  atomic_write_file(artifact, "payload");
  write_manifest_sidecar(artifact.string(), a);
  const json sidecar = json::parse(read_file(artifact.string() + ".manifest.json"));
  CHECK(sidecar.at("command") == "simulate");
  CHECK(sidecar.contains("created"));
  CHECK(sidecar.at("artifact") == artifact.string());
  CHECK_FALSE(std::filesystem::exists(artifact.string() + ".tmp"));
}
