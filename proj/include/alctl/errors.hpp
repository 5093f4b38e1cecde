#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace alctl {

// Error categories map onto the CLI exit codes.
enum class ErrorKind {
  validation,       // bad arguments, malformed data, out-of-range values
  storage,          // I/O failures
  format,           // ALF1 decoding failures
  manifest,         // JSONL manifest failures
  geometry,         // tiling / pooling extents
  dimension,        // vector or raster shape mismatch
  missing_artifact, // per-tile artifact files absent
  budget,           // budget larger than the candidate set
  pool_exhausted,   // nothing left to select across rounds
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  int exit_code() const noexcept {
    switch (kind_) {
      case ErrorKind::missing_artifact:
        return 3;
      case ErrorKind::budget:
      case ErrorKind::pool_exhausted:
        return 4;
      default:
        return 2;
    }
  }

 private:
  ErrorKind kind_;
};

inline Error validation_error(const std::string& what) { return {ErrorKind::validation, what}; }
inline Error storage_error(const std::string& what) { return {ErrorKind::storage, what}; }
inline Error format_error(const std::string& what) { return {ErrorKind::format, what}; }
inline Error geometry_error(const std::string& what) { return {ErrorKind::geometry, what}; }
inline Error dimension_error(const std::string& what) { return {ErrorKind::dimension, what}; }
inline Error budget_error(const std::string& what) { return {ErrorKind::budget, what}; }

class ManifestError : public Error {
 public:
  ManifestError(std::size_t line, const std::string& what)
      : Error(ErrorKind::manifest, "line " + std::to_string(line) + ": " + what), line_(line), detail_(what) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

// Carries every tile whose artifact could not be found, not just the first.
class MissingArtifactError : public Error {
 public:
  MissingArtifactError(std::string role, std::vector<std::string> tile_ids)
      : Error(ErrorKind::missing_artifact, describe(role, tile_ids)),
        role_(std::move(role)),
        tile_ids_(std::move(tile_ids)) {}

  const std::string& role() const noexcept { return role_; }
  const std::vector<std::string>& tile_ids() const noexcept { return tile_ids_; }

 private:
  static std::string describe(const std::string& role, const std::vector<std::string>& ids) {
    std::string msg = "missing '" + role + "' artifact for " + std::to_string(ids.size()) + " tile(s):";
    for (const auto& id : ids) msg += " " + id;
    return msg;
  }

  std::string role_;
  std::vector<std::string> tile_ids_;
};

}  // namespace alctl
