#pragma once

// Line-oriented JSONL manifests: the candidate pool, budgeted selections and
// per-tile score listings.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "alctl/errors.hpp"
#include "json.hpp"

namespace alctl {

using json = nlohmann::json;

struct PoolRecord {
  std::string tile_id;
  std::string source_image_id;
  std::map<std::string, std::string> artifact_paths;  // role -> path
  std::optional<bool> positive;                        // label metadata, unlimited baseline only

  friend bool operator==(const PoolRecord&, const PoolRecord&) = default;
};

// Records are kept sorted by tile_id; that order drives every tie-break.
struct PoolManifest {
  std::vector<PoolRecord> records;

  std::size_t size() const noexcept { return records.size(); }

  const PoolRecord* find(const std::string& tile_id) const {
    auto it = std::lower_bound(records.begin(), records.end(), tile_id,
                               [](const PoolRecord& r, const std::string& id) { return r.tile_id < id; });
    return it != records.end() && it->tile_id == tile_id ? &*it : nullptr;
  }

  bool contains(const std::string& tile_id) const { return find(tile_id) != nullptr; }

  std::vector<std::string> tile_ids() const {
    std::vector<std::string> ids;
    ids.reserve(records.size());
    for (const auto& r : records) ids.push_back(r.tile_id);
    return ids;
  }

  // Sorts and rejects duplicates. Used after programmatic construction.
  void canonicalize() {
    std::stable_sort(records.begin(), records.end(),
                     [](const PoolRecord& a, const PoolRecord& b) { return a.tile_id < b.tile_id; });
    for (std::size_t i = 1; i < records.size(); ++i)
      if (records[i].tile_id == records[i - 1].tile_id)
        throw validation_error("duplicate tile_id '" + records[i].tile_id + "'");
  }
};

enum class Strategy { random, uncertainty, coreset, unlimited };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::random: return "random";
    case Strategy::uncertainty: return "uncertainty";
    case Strategy::coreset: return "coreset";
    case Strategy::unlimited: return "unlimited";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& name) {
  if (name == "random") return Strategy::random;
  if (name == "uncertainty") return Strategy::uncertainty;
  if (name == "coreset") return Strategy::coreset;
  if (name == "unlimited") return Strategy::unlimited;
  throw validation_error("unknown strategy '" + name + "' (expected random, uncertainty, coreset or unlimited)");
}

struct SelectionEntry {
  std::uint64_t rank = 0;
  std::string tile_id;
  std::optional<double> score;

  friend bool operator==(const SelectionEntry&, const SelectionEntry&) = default;
};

struct SelectionManifest {
  Strategy strategy = Strategy::random;
  std::uint64_t budget = 0;
  std::vector<SelectionEntry> entries;

  std::vector<std::string> tile_ids() const {
    std::vector<std::string> ids;
    ids.reserve(entries.size());
    for (const auto& e : entries) ids.push_back(e.tile_id);
    return ids;
  }

  void append(std::string tile_id, std::optional<double> score) {
    entries.push_back({entries.size() + 1, std::move(tile_id), score});
  }

  friend bool operator==(const SelectionManifest&, const SelectionManifest&) = default;
};

struct ScoreRecord {
  std::string tile_id;
  double score = 0.0;

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

// Checks the selection invariants; `pool` may be null to skip membership.
inline void validate_selection(const SelectionManifest& sel, const PoolManifest* pool = nullptr) {
  if (sel.strategy != Strategy::unlimited && sel.entries.size() > sel.budget)
    throw validation_error("selection has " + std::to_string(sel.entries.size()) + " entries but budget is " +
                           std::to_string(sel.budget));
  for (std::size_t i = 0; i < sel.entries.size(); ++i) {
    if (sel.entries[i].rank != i + 1)
      throw validation_error("selection ranks must be 1..n in order; entry " + std::to_string(i + 1) + " has rank " +
                             std::to_string(sel.entries[i].rank));
    if (pool && !pool->contains(sel.entries[i].tile_id))
      throw validation_error("selected tile '" + sel.entries[i].tile_id + "' is not in the pool manifest");
  }
}

namespace detail {

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw storage_error("cannot open " + path.string() + " for writing");
  return out;
}

inline std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw storage_error("cannot open " + path.string() + " for reading");
  return in;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw storage_error("write failed for " + path.string());
}

// Calls fn(json, line_number) for every non-blank line.
template <typename Fn>
void for_each_json_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ManifestError(lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ManifestError(lineno, "record is not a JSON object");
    fn(j, lineno);
  }
}

inline std::string required_string(const json& j, const char* key, std::size_t lineno) {
  auto it = j.find(key);
  if (it == j.end()) throw ManifestError(lineno, std::string("missing required field '") + key + "'");
  if (!it->is_string()) throw ManifestError(lineno, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace detail

inline PoolManifest parse_manifest(std::istream& in) {
  PoolManifest m;
  std::unordered_map<std::string, std::size_t> first_seen;
  detail::for_each_json_line(in, [&](const json& j, std::size_t lineno) {
    PoolRecord r;
    r.tile_id = detail::required_string(j, "tile_id", lineno);
    r.source_image_id = detail::required_string(j, "source_image_id", lineno);
    if (r.tile_id.empty()) throw ManifestError(lineno, "tile_id is empty");
    if (auto it = j.find("artifact_paths"); it != j.end() && !it->is_null()) {
      if (!it->is_object()) throw ManifestError(lineno, "artifact_paths must be an object");
      for (const auto& [role, p] : it->items()) {
        if (!p.is_string()) throw ManifestError(lineno, "artifact path for role '" + role + "' must be a string");
        r.artifact_paths.emplace(role, p.get<std::string>());
      }
    }
    if (auto it = j.find("positive"); it != j.end() && !it->is_null()) {
      if (!it->is_boolean()) throw ManifestError(lineno, "positive must be a boolean");
      r.positive = it->get<bool>();
    }
    auto [pos, inserted] = first_seen.emplace(r.tile_id, lineno);
    if (!inserted)
      throw ManifestError(lineno, "duplicate tile_id '" + r.tile_id + "' (first seen on line " +
                                      std::to_string(pos->second) + ")");
    m.records.push_back(std::move(r));
  });
  std::sort(m.records.begin(), m.records.end(),
            [](const PoolRecord& a, const PoolRecord& b) { return a.tile_id < b.tile_id; });
  return m;
}

inline PoolManifest read_manifest(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  try {
    return parse_manifest(in);
  } catch (const ManifestError& e) {
    throw ManifestError(e.line(), path.string() + ": " + e.detail());
  }
}

inline json to_json(const PoolRecord& r) {
  json j;
  j["tile_id"] = r.tile_id;
  j["source_image_id"] = r.source_image_id;
  j["artifact_paths"] = r.artifact_paths;
  if (r.positive) j["positive"] = *r.positive;
  return j;
}

inline void write_manifest(const PoolManifest& m, std::ostream& out) {
  for (const auto& r : m.records) out << to_json(r).dump() << '\n';
}

inline void write_manifest(const PoolManifest& m, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  write_manifest(m, out);
  detail::finish(out, path);
}

// Selection file: one header line {"budget","strategy"} followed by one line
// per entry {"rank","score","tile_id"} in rank order.
inline void write_selection(const SelectionManifest& sel, std::ostream& out) {
  validate_selection(sel);
  json header;
  header["strategy"] = strategy_name(sel.strategy);
  header["budget"] = sel.budget;
  out << header.dump() << '\n';
  for (const auto& e : sel.entries) {
    json j;
    j["rank"] = e.rank;
    j["tile_id"] = e.tile_id;
    j["score"] = e.score ? json(*e.score) : json(nullptr);
    out << j.dump() << '\n';
  }
}

inline void write_selection(const SelectionManifest& sel, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  write_selection(sel, out);
  detail::finish(out, path);
}

inline SelectionManifest parse_selection(std::istream& in) {
  SelectionManifest sel;
  bool have_header = false;
  detail::for_each_json_line(in, [&](const json& j, std::size_t lineno) {
    if (!have_header) {
      try {
        sel.strategy = parse_strategy(detail::required_string(j, "strategy", lineno));
      } catch (const ManifestError&) {
        throw;
      } catch (const Error& e) {
        throw ManifestError(lineno, e.what());
      }
      auto b = j.find("budget");
      if (b == j.end() || !b->is_number_unsigned()) throw ManifestError(lineno, "missing required field 'budget'");
      sel.budget = b->get<std::uint64_t>();
      have_header = true;
      return;
    }
    SelectionEntry e;
    auto rank = j.find("rank");
    if (rank == j.end() || !rank->is_number_unsigned()) throw ManifestError(lineno, "missing required field 'rank'");
    e.rank = rank->get<std::uint64_t>();
    e.tile_id = detail::required_string(j, "tile_id", lineno);
    if (auto s = j.find("score"); s != j.end() && !s->is_null()) {
      if (!s->is_number()) throw ManifestError(lineno, "score must be a number");
      e.score = s->get<double>();
    }
    sel.entries.push_back(std::move(e));
  });
  if (!have_header) throw ManifestError(0, "selection file has no header line");
  validate_selection(sel);
  return sel;
}

inline SelectionManifest read_selection(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  return parse_selection(in);
}

inline void write_scores(const std::vector<ScoreRecord>& scores, std::ostream& out) {
  for (const auto& s : scores) {
    json j;
    j["tile_id"] = s.tile_id;
    j["score"] = s.score;
    out << j.dump() << '\n';
  }
}

inline void write_scores(const std::vector<ScoreRecord>& scores, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  write_scores(scores, out);
  detail::finish(out, path);
}

inline std::vector<ScoreRecord> read_scores(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  std::vector<ScoreRecord> scores;
  std::unordered_map<std::string, std::size_t> seen;
  detail::for_each_json_line(in, [&](const json& j, std::size_t lineno) {
    ScoreRecord r;
    r.tile_id = detail::required_string(j, "tile_id", lineno);
    auto s = j.find("score");
    if (s == j.end() || !s->is_number()) throw ManifestError(lineno, "missing required field 'score'");
    r.score = s->get<double>();
    if (!seen.emplace(r.tile_id, lineno).second)
      throw ManifestError(lineno, "duplicate tile_id '" + r.tile_id + "'");
    scores.push_back(std::move(r));
  });
  std::sort(scores.begin(), scores.end(), [](const ScoreRecord& a, const ScoreRecord& b) { return a.tile_id < b.tile_id; });
  return scores;
}

// Reads a JSONL list of {"tile_id": ...} records (extra fields ignored).
inline std::vector<std::string> read_tile_list(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  std::vector<std::string> ids;
  detail::for_each_json_line(in, [&](const json& j, std::size_t lineno) {
    ids.push_back(detail::required_string(j, "tile_id", lineno));
  });
  return ids;
}

}  // namespace alctl
