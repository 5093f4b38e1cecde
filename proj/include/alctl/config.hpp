#pragma once

// Run configuration and its key = value file format:
//
//   # comment
//   strategy = "coreset"
//   budget = 1000
//   preselect_fraction = 0.05
//
// Keys mirror RunConfig fields. Values may be bare or double-quoted.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "alctl/coreset.hpp"
#include "alctl/errors.hpp"
#include "alctl/manifest.hpp"
#include "alctl/pooler.hpp"
#include "alctl/sampling.hpp"
#include "alctl/scorer.hpp"
#include "alctl/tiler.hpp"

namespace alctl {

struct RunConfig {
  Strategy strategy = Strategy::random;
  std::uint64_t budget = 0;
  double preselect_fraction = kDefaultPreselectFraction;
  std::uint32_t dropout_passes = kDefaultDropoutPasses;
  std::uint32_t pool_grid = kDefaultPoolGrid;
  std::uint32_t tile_size = kDefaultTileSize;
  std::uint64_t outlier_budget = kDefaultOutlierBudget;
  std::optional<std::uint64_t> seed;
  double positive_ratio = kDefaultPositiveRatio;

  void validate() const {
    if (strategy != Strategy::unlimited && budget == 0) throw validation_error("budget must be a positive integer");
    if (!(preselect_fraction > 0.0 && preselect_fraction <= 1.0))
      throw validation_error("preselect_fraction must lie in (0, 1]");
    if (dropout_passes < 2) throw validation_error("dropout_passes must be at least 2");
    if (pool_grid == 0) throw validation_error("pool_grid must be positive");
    if (tile_size == 0) throw validation_error("tile_size must be positive");
    if (!(positive_ratio > 0.0 && positive_ratio <= 1.0)) throw validation_error("positive_ratio must lie in (0, 1]");
    if ((strategy == Strategy::random || strategy == Strategy::unlimited) && !seed)
      throw validation_error(std::string("a seed is required for strategy '") + strategy_name(strategy) + "'");
  }

  json to_json() const {
    return json{{"strategy", strategy_name(strategy)},
                {"budget", budget},
                {"preselect_fraction", preselect_fraction},
                {"dropout_passes", dropout_passes},
                {"pool_grid", pool_grid},
                {"tile_size", tile_size},
                {"outlier_budget", outlier_budget},
                {"seed", seed ? json(*seed) : json(nullptr)},
                {"positive_ratio", positive_ratio}};
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  if constexpr (std::is_unsigned_v<T>)
    if (!value.empty() && value.front() == '-') throw validation_error("'" + key + "' must be non-negative");
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last || value.empty())
    throw validation_error("cannot parse '" + value + "' as a value for '" + key + "'");
  return out;
}

}  // namespace detail

inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_number;
  if (key == "strategy")
    cfg.strategy = parse_strategy(value);
  else if (key == "budget")
    cfg.budget = parse_number<std::uint64_t>(key, value);
  else if (key == "preselect_fraction")
    cfg.preselect_fraction = parse_number<double>(key, value);
  else if (key == "dropout_passes")
    cfg.dropout_passes = parse_number<std::uint32_t>(key, value);
  else if (key == "pool_grid")
    cfg.pool_grid = parse_number<std::uint32_t>(key, value);
  else if (key == "tile_size")
    cfg.tile_size = parse_number<std::uint32_t>(key, value);
  else if (key == "outlier_budget")
    cfg.outlier_budget = parse_number<std::uint64_t>(key, value);
  else if (key == "seed")
    cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "positive_ratio")
    cfg.positive_ratio = parse_number<double>(key, value);
  else
    throw validation_error("unknown config key '" + key + "'");
}

inline std::vector<std::pair<std::string, std::string>> parse_config_text(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos && line.substr(0, hash).find('"') == std::string_view::npos)
      line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw validation_error("config line " + std::to_string(lineno) + ": expected key = value");
    auto key = detail::trim(line.substr(0, eq));
    auto value = detail::trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"') {
      const auto close = value.find('"', 1);
      if (close == std::string_view::npos)
        throw validation_error("config line " + std::to_string(lineno) + ": unterminated string");
      value = value.substr(1, close - 1);
    }
    if (key.empty()) throw validation_error("config line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::string(key), std::string(value));
  }
  return out;
}

inline void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw storage_error("cannot open config " + path.string());
  for (const auto& [k, v] : parse_config_text(in)) apply_setting(cfg, k, v);
}

}  // namespace alctl
