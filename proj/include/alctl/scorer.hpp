#pragma once

// Per-tile scores: mean segmentation response (cheap pre-selection) and
// Monte-Carlo dropout uncertainty (mean of per-pixel variances across the
// stochastic passes).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "alctl/array_store.hpp"
#include "alctl/errors.hpp"
#include "alctl/manifest.hpp"

namespace alctl {

inline constexpr double kDefaultPreselectFraction = 0.05;
inline constexpr std::uint32_t kDefaultDropoutPasses = 10;

inline void check_probabilities(std::span<const float> values, const std::string& what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float v = values[i];
    if (!(v >= 0.0f && v <= 1.0f))
      throw validation_error(what + ": value " + std::to_string(v) + " at index " + std::to_string(i) +
                             " is outside [0, 1]");
  }
}

inline double mean_response(const ArrayContainer& map) {
  if (map.channels() != 1)
    throw validation_error("probability map must have 1 channel, got " + std::to_string(map.channels()));
  const auto values = map.f32();
  check_probabilities(values, "probability map");
  double sum = 0.0;
  for (float v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

// Strict weak order used by every ranking: score descending, tile_id ascending.
inline bool score_order(const ScoreRecord& a, const ScoreRecord& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tile_id < b.tile_id;
}

inline std::vector<ScoreRecord> ranked(std::vector<ScoreRecord> scores) {
  for (const auto& s : scores)
    if (!std::isfinite(s.score)) throw validation_error("score for '" + s.tile_id + "' is not finite");
  std::sort(scores.begin(), scores.end(), score_order);
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i].tile_id == scores[i - 1].tile_id)
      throw validation_error("duplicate tile_id '" + scores[i].tile_id + "' in scores");
  return scores;
}

inline std::size_t preselect_count(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw validation_error("pre-selection fraction must lie in (0, 1], got " + std::to_string(fraction));
  const auto kept = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  return std::max<std::size_t>(1, kept);
}

// Top max(1, floor(fraction * n)) tiles by descending score.
inline std::vector<std::string> preselect(std::vector<ScoreRecord> scores, double fraction) {
  const std::size_t keep = preselect_count(scores.size(), fraction);
  if (scores.empty()) throw validation_error("pre-selection needs at least one score");
  scores = ranked(std::move(scores));
  std::vector<std::string> ids;
  ids.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) ids.push_back(std::move(scores[i].tile_id));
  return ids;
}

// Mean over pixels of the population variance across the K channels.
inline double dropout_variance(const ArrayContainer& stack) {
  const std::size_t k = stack.channels();
  if (k < 2) throw validation_error("dropout stack needs at least 2 passes, got " + std::to_string(k));
  const auto values = stack.f32();
  check_probabilities(values, "dropout stack");

  double total = 0.0;
  for (std::size_t p = 0; p < stack.pixels(); ++p) {
    // Welford accumulation per pixel.
    double mean = 0.0;
    double m2 = 0.0;
    const float* px = values.data() + p * k;
    for (std::size_t i = 0; i < k; ++i) {
      const double x = px[i];
      const double delta = x - mean;
      mean += delta / static_cast<double>(i + 1);
      m2 += delta * (x - mean);
    }
    total += m2 / static_cast<double>(k);
  }
  return total / static_cast<double>(stack.pixels());
}

inline SelectionManifest rank_by_uncertainty(std::vector<ScoreRecord> scores, std::uint64_t budget) {
  if (budget == 0) throw validation_error("budget must be positive");
  if (budget > scores.size())
    throw budget_error("budget " + std::to_string(budget) + " exceeds the " + std::to_string(scores.size()) +
                       " scored tiles");
  scores = ranked(std::move(scores));
  SelectionManifest sel{Strategy::uncertainty, budget, {}};
  sel.entries.reserve(budget);
  for (std::size_t i = 0; i < budget; ++i) sel.append(std::move(scores[i].tile_id), scores[i].score);
  return sel;
}

}  // namespace alctl
