#pragma once

// Seeded sampling for the random baseline and training-set mixes.
//
// Generator: std::mt19937_64 seeded with the 64-bit run seed. Its output
// sequence is fixed by the C++ standard, so it is identical on every
// conforming platform. Bounded draws do not use std::uniform_int_distribution
// (its algorithm is implementation-defined); uniform_index below is plain
// rejection sampling: reject raw draws below 2^64 mod n, return draw mod n.
// Sampling without replacement is a partial Fisher-Yates shuffle over the
// candidates in ascending tile_id order: for i = 0..m-1, swap slot i with
// slot i + uniform_index(n - i).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "alctl/errors.hpp"
#include "alctl/manifest.hpp"

namespace alctl {

inline constexpr double kDefaultPositiveRatio = 0.9;

using SeededGenerator = std::mt19937_64;

inline std::uint64_t uniform_index(SeededGenerator& rng, std::uint64_t n) {
  if (n == 0) throw validation_error("uniform_index needs a non-empty range");
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t x = rng();
    if (x >= threshold) return x % n;
  }
}

// First m items of a seeded partial Fisher-Yates over the sorted input.
inline std::vector<std::string> sample_without_replacement(std::vector<std::string> items, std::size_t m,
                                                           std::uint64_t seed) {
  if (m > items.size())
    throw budget_error("cannot sample " + std::to_string(m) + " of " + std::to_string(items.size()) + " items");
  std::sort(items.begin(), items.end());
  SeededGenerator rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, items.size() - i));
    std::swap(items[i], items[j]);
  }
  items.resize(m);
  return items;
}

inline SelectionManifest select_random(std::vector<std::string> candidates, std::uint64_t budget, std::uint64_t seed) {
  if (budget == 0) throw validation_error("budget must be positive");
  if (budget > candidates.size())
    throw budget_error("budget " + std::to_string(budget) + " exceeds the " + std::to_string(candidates.size()) +
                       " candidates");
  SelectionManifest sel{Strategy::random, budget, {}};
  for (auto& id : sample_without_replacement(std::move(candidates), budget, seed)) sel.append(std::move(id), std::nullopt);
  return sel;
}

inline SelectionManifest select_random(const PoolManifest& pool, std::uint64_t budget, std::uint64_t seed) {
  return select_random(pool.tile_ids(), budget, seed);
}

struct TrainingMix {
  std::vector<std::string> tiles;   // all positives (sorted), then sampled negatives in draw order
  std::size_t negatives_wanted = 0;
  std::size_t negatives_taken = 0;

  bool short_of_negatives() const noexcept { return negatives_taken < negatives_wanted; }
};

// All positives plus round(|P| * (1 - r) / r) seeded-sampled negatives. When
// fewer negatives exist, all of them are taken and short_of_negatives() is set.
inline TrainingMix build_training_mix(std::vector<std::string> positives, std::vector<std::string> negatives,
                                      double positive_ratio, std::uint64_t seed) {
  if (!(positive_ratio > 0.0 && positive_ratio <= 1.0))
    throw validation_error("positive_ratio must lie in (0, 1], got " + std::to_string(positive_ratio));
  if (positives.empty()) throw validation_error("training mix needs at least one positive tile");
  std::sort(positives.begin(), positives.end());
  std::sort(negatives.begin(), negatives.end());
  for (std::size_t i = 1; i < positives.size(); ++i)
    if (positives[i] == positives[i - 1]) throw validation_error("duplicate positive tile '" + positives[i] + "'");
  for (const auto& n : negatives)
    if (std::binary_search(positives.begin(), positives.end(), n))
      throw validation_error("tile '" + n + "' is listed as both positive and negative");

  TrainingMix mix;
  mix.negatives_wanted = static_cast<std::size_t>(
      std::llround(static_cast<double>(positives.size()) * (1.0 - positive_ratio) / positive_ratio));
  mix.negatives_taken = std::min(mix.negatives_wanted, negatives.size());
  mix.tiles = std::move(positives);
  for (auto& id : sample_without_replacement(std::move(negatives), mix.negatives_taken, seed))
    mix.tiles.push_back(std::move(id));
  return mix;
}

}  // namespace alctl
