#pragma once

// Fixed-size tile windows over a large raster. The last window on each axis
// is clamped inward so it abuts the raster edge instead of being padded.

#include <cstdint>
#include <string>
#include <vector>

#include "alctl/errors.hpp"
#include "alctl/manifest.hpp"

namespace alctl {

inline constexpr std::uint32_t kDefaultTileSize = 512;

struct RasterMeta {
  std::string image_id;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
};

struct TileRef {
  std::string tile_id;
  std::string image_id;
  std::uint32_t x = 0;  // column offset
  std::uint32_t y = 0;  // row offset
  std::uint32_t size = 0;

  friend bool operator==(const TileRef&, const TileRef&) = default;
};

struct TileGrid {
  RasterMeta raster;
  std::uint32_t tile_size = 0;
  std::vector<TileRef> tiles;  // (y, x) order
};

// Offsets 0, s, 2s, ... with the final one pulled back to extent - s.
inline std::vector<std::uint32_t> axis_offsets(std::uint32_t extent, std::uint32_t tile_size) {
  const std::uint32_t count = (extent + tile_size - 1) / tile_size;
  std::vector<std::uint32_t> offsets;
  offsets.reserve(count);
  for (std::uint32_t i = 0; i + 1 < count; ++i) offsets.push_back(i * tile_size);
  offsets.push_back(extent - tile_size);
  return offsets;
}

inline std::string make_tile_id(const std::string& image_id, std::uint32_t y, std::uint32_t x) {
  return image_id + "_" + std::to_string(y) + "_" + std::to_string(x);
}

inline TileGrid build_tile_grid(const RasterMeta& raster, std::uint32_t tile_size = kDefaultTileSize) {
  if (tile_size == 0) throw validation_error("tile_size must be positive");
  if (raster.height == 0 || raster.width == 0)
    throw validation_error("raster '" + raster.image_id + "' has a zero extent");
  if (raster.height < tile_size || raster.width < tile_size)
    throw geometry_error("raster '" + raster.image_id + "' (" + std::to_string(raster.height) + "x" +
                         std::to_string(raster.width) + ") is smaller than tile size " + std::to_string(tile_size));

  TileGrid grid{raster, tile_size, {}};
  const auto ys = axis_offsets(raster.height, tile_size);
  const auto xs = axis_offsets(raster.width, tile_size);
  grid.tiles.reserve(ys.size() * xs.size());
  for (auto y : ys)
    for (auto x : xs) grid.tiles.push_back({make_tile_id(raster.image_id, y, x), raster.image_id, x, y, tile_size});
  return grid;
}

// Artifact roles every downstream stage knows how to resolve.
inline const std::vector<std::string>& artifact_roles() {
  static const std::vector<std::string> roles{"probmap", "dropout_stack", "features", "gt"};
  return roles;
}

// Default artifact location relative to the artifact root: <role>/<tile_id>.alf
inline std::string default_artifact_path(const std::string& role, const std::string& tile_id) {
  return role + "/" + tile_id + ".alf";
}

inline PoolManifest to_pool_manifest(const std::vector<TileGrid>& grids) {
  PoolManifest m;
  for (const auto& g : grids)
    for (const auto& t : g.tiles) {
      PoolRecord r{t.tile_id, t.image_id, {}, std::nullopt};
      for (const auto& role : artifact_roles()) r.artifact_paths.emplace(role, default_artifact_path(role, t.tile_id));
      m.records.push_back(std::move(r));
    }
  m.canonicalize();
  return m;
}

inline std::vector<RasterMeta> read_rasters(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  std::vector<RasterMeta> rasters;
  detail::for_each_json_line(in, [&](const json& j, std::size_t lineno) {
    RasterMeta r;
    r.image_id = detail::required_string(j, "image_id", lineno);
    for (auto [key, field] : {std::pair{"height", &r.height}, std::pair{"width", &r.width}}) {
      auto it = j.find(key);
      if (it == j.end() || !it->is_number_unsigned() || it->get<std::uint64_t>() == 0 ||
          it->get<std::uint64_t>() > UINT32_MAX)
        throw ManifestError(lineno, std::string("field '") + key + "' must be a positive integer");
      *field = it->get<std::uint32_t>();
    }
    rasters.push_back(std::move(r));
  });
  return rasters;
}

}  // namespace alctl
