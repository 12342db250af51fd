#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cluster/errors.hpp"
#include "cluster/manifest.hpp"
#include "cluster/simulator.hpp"

namespace cluster {

// Dataset CSV schema:
//   record,u_1,...,u_N,x_1,...,x_N,total
// one row per recorded interval. Values use the shortest decimal that
// parses back to the same double, so save/load round trips are exact.

namespace detail {

inline std::string format_double(double v) {
  char buffer[40];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), v);
  if (ec != std::errc()) throw DomainError("format_double: value not representable");
  return {buffer, end};
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline double parse_double(std::string_view text, std::size_t line_no, const char* what) {
  double value = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size())
    throw ParseError("dataset line " + std::to_string(line_no) + ": bad " + what + " value '" +
                     std::string(text) + "'");
  return value;
}

}  // namespace detail

inline std::string dataset_to_csv(const Dataset& data) {
  std::string out = "record";
  for (std::size_t i = 1; i <= data.n_providers; ++i) out += ",u_" + std::to_string(i);
  for (std::size_t i = 1; i <= data.n_providers; ++i) out += ",x_" + std::to_string(i);
  out += ",total\n";
  for (std::size_t r = 0; r < data.records.size(); ++r) {
    out += std::to_string(r + 1);
    for (double u : data.records[r].availability) out += "," + detail::format_double(u);
    for (double x : data.records[r].loads) out += "," + detail::format_double(x);
    out += "," + detail::format_double(data.records[r].total);
    out += "\n";
  }
  return out;
}

// Parses and validates a dataset. Loads must match the declared per-row
// total within 1e-3; availabilities must lie in [0, 1]. Errors carry the
// 1-based line number of the offending row.
inline Dataset dataset_from_csv(std::string_view text) {
  if (text.empty()) throw ParseError("dataset: empty input");
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    std::string_view line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    start = pos + 1;
  }
  if (lines.size() < 2) throw SchemaError("dataset: need a header and at least one record row");

  auto header = detail::split(lines[0], ',');
  if (header.size() < 4 || header.front() != "record" || header.back() != "total")
    throw SchemaError("dataset: header must be record,u_1..u_N,x_1..x_N,total");
  if ((header.size() - 2) % 2 != 0)
    throw SchemaError("dataset: availability and load column counts differ");
  const std::size_t n = (header.size() - 2) / 2;
  for (std::size_t i = 0; i < n; ++i) {
    if (header[1 + i] != "u_" + std::to_string(i + 1) ||
        header[1 + n + i] != "x_" + std::to_string(i + 1))
      throw SchemaError("dataset: unexpected column name '" + std::string(header[1 + i]) + "'");
  }

  Dataset data;
  data.n_providers = n;
  data.records.reserve(lines.size() - 1);
  for (std::size_t row = 1; row < lines.size(); ++row) {
    const std::size_t line_no = row + 1;
    auto fields = detail::split(lines[row], ',');
    if (fields.size() != header.size())
      throw ParseError("dataset line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, found " +
                       std::to_string(fields.size()));
    DatasetRecord record;
    record.availability.resize(n);
    record.loads.resize(n);
    double load_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      record.availability[i] = detail::parse_double(fields[1 + i], line_no, "availability");
      if (record.availability[i] < 0.0 || record.availability[i] > 1.0)
        throw InvariantError("dataset line " + std::to_string(line_no) +
                             ": availability outside [0, 1]");
      record.loads[i] = detail::parse_double(fields[1 + n + i], line_no, "load");
      if (record.loads[i] < 0.0)
        throw InvariantError("dataset line " + std::to_string(line_no) + ": negative load");
      load_sum += record.loads[i];
    }
    record.total = detail::parse_double(fields.back(), line_no, "total");
    if (std::abs(load_sum - record.total) > 1e-3)
      throw InvariantError("dataset line " + std::to_string(line_no) + ": loads sum to " +
                           detail::format_double(load_sum) + " but declare total " +
                           detail::format_double(record.total));
    data.records.push_back(std::move(record));
  }
  data.total_load = data.records.front().total;
  validate_dataset(data, 1e-3);
  return data;
}

inline void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  atomic_write_file(path, dataset_to_csv(data));
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  return dataset_from_csv(read_file(path));
}

// Content fingerprint over the canonical CSV serialisation, so in-memory
// and on-disk datasets agree.
inline std::string dataset_fingerprint(const Dataset& data) {
  return fnv1a64_hex(dataset_to_csv(data));
}

// Random train/test split over records. The test side holds
// round(test_fraction * n) records, clamped so both sides are nonempty.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double test_fraction,
                                                 Rng& rng) {
  if (!(test_fraction > 0.0) || !(test_fraction < 1.0))
    throw ConfigError("split_dataset: test fraction must lie in (0, 1)");
  const std::size_t n = data.records.size();
  if (n < 2) throw DomainError("split_dataset: need at least 2 records");
  std::size_t n_test = static_cast<std::size_t>(std::llround(test_fraction * double(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[rng.uniform_index(i + 1)]);
  Dataset train, test;
  train.n_providers = test.n_providers = data.n_providers;
  train.total_load = test.total_load = data.total_load;
  for (std::size_t i = 0; i < n; ++i)
    (i < n - n_test ? train : test).records.push_back(data.records[order[i]]);
  return {std::move(train), std::move(test)};
}

}  // namespace cluster
