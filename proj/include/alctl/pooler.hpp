#pragma once

// Decoder feature map -> fixed-length descriptor: max pooling onto a GxG grid,
// then the mean of the G*G cell maxima per channel.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "alctl/array_store.hpp"
#include "alctl/errors.hpp"

namespace alctl {

inline constexpr std::uint32_t kDefaultPoolGrid = 8;

struct FeatureVector {
  std::string tile_id;
  std::vector<double> values;
};

// Band i spans [floor(i*extent/grid), floor((i+1)*extent/grid)).
inline std::vector<std::size_t> band_bounds(std::size_t extent, std::size_t grid) {
  std::vector<std::size_t> b(grid + 1);
  for (std::size_t i = 0; i <= grid; ++i) b[i] = i * extent / grid;
  return b;
}

inline std::vector<double> pool_features(const ArrayContainer& map, std::uint32_t grid = kDefaultPoolGrid) {
  if (grid == 0) throw validation_error("pool grid must be positive");
  if (map.height() < grid || map.width() < grid)
    throw geometry_error("feature map " + std::to_string(map.height()) + "x" + std::to_string(map.width()) +
                         " is smaller than the " + std::to_string(grid) + "x" + std::to_string(grid) + " pool grid");
  const auto values = map.f32();
  const std::size_t c = map.channels();
  const auto rows = band_bounds(map.height(), grid);
  const auto cols = band_bounds(map.width(), grid);

  std::vector<float> cell_max(std::size_t{grid} * grid * c, -std::numeric_limits<float>::infinity());
  for (std::size_t gi = 0; gi < grid; ++gi)
    for (std::size_t r = rows[gi]; r < rows[gi + 1]; ++r)
      for (std::size_t gj = 0; gj < grid; ++gj) {
        float* cell = cell_max.data() + (gi * grid + gj) * c;
        for (std::size_t col = cols[gj]; col < cols[gj + 1]; ++col) {
          const float* px = values.data() + map.index(r, col);
          for (std::size_t ch = 0; ch < c; ++ch) cell[ch] = std::max(cell[ch], px[ch]);
        }
      }

  std::vector<double> out(c, 0.0);
  for (std::size_t cell = 0; cell < std::size_t{grid} * grid; ++cell)
    for (std::size_t ch = 0; ch < c; ++ch) out[ch] += cell_max[cell * c + ch];
  const double cells = static_cast<double>(grid) * grid;
  for (std::size_t ch = 0; ch < c; ++ch) {
    out[ch] /= cells;
    if (!std::isfinite(out[ch])) throw validation_error("pooled feature " + std::to_string(ch) + " is not finite");
  }
  return out;
}

// N x C x 1 F32 matrix, one row per tile, rows in the given order.
inline ArrayContainer feature_matrix(const std::vector<FeatureVector>& rows) {
  if (rows.empty()) throw validation_error("feature matrix needs at least one row");
  const std::size_t c = rows.front().values.size();
  std::vector<float> data;
  data.reserve(rows.size() * c);
  for (const auto& r : rows) {
    if (r.values.size() != c)
      throw dimension_error("feature vector for '" + r.tile_id + "' has " + std::to_string(r.values.size()) +
                            " components, expected " + std::to_string(c));
    for (double v : r.values) data.push_back(static_cast<float>(v));
  }
  return ArrayContainer::make_f32(static_cast<std::uint32_t>(rows.size()), static_cast<std::uint32_t>(c), 1,
                                  std::move(data));
}

inline std::vector<FeatureVector> feature_rows(const ArrayContainer& matrix, const std::vector<std::string>& tile_ids) {
  if (matrix.channels() != 1) throw dimension_error("feature matrix must have a single channel");
  if (matrix.height() != tile_ids.size())
    throw dimension_error("feature matrix has " + std::to_string(matrix.height()) + " rows but the row map lists " +
                          std::to_string(tile_ids.size()) + " tiles");
  const auto values = matrix.f32();
  std::vector<FeatureVector> rows(tile_ids.size());
  for (std::size_t i = 0; i < tile_ids.size(); ++i) {
    rows[i].tile_id = tile_ids[i];
    rows[i].values.assign(values.begin() + i * matrix.width(), values.begin() + (i + 1) * matrix.width());
  }
  return rows;
}

}  // namespace alctl
