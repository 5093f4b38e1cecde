#pragma once

// Selection pipeline: mean-response pre-selection, then the configured
// strategy over the surviving candidates, then the budget cut. Also the
// multi-round bookkeeping and the report comparison.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "alctl/array_store.hpp"
#include "alctl/config.hpp"
#include "alctl/coreset.hpp"
#include "alctl/errors.hpp"
#include "alctl/evaluator.hpp"
#include "alctl/manifest.hpp"
#include "alctl/pooler.hpp"
#include "alctl/sampling.hpp"
#include "alctl/scorer.hpp"
#include "alctl/tiler.hpp"

namespace alctl {

namespace fs = std::filesystem;

inline fs::path resolve_artifact(const PoolRecord& record, const std::string& role, const fs::path& root) {
  auto it = record.artifact_paths.find(role);
  fs::path p = it != record.artifact_paths.end() ? fs::path(it->second) : fs::path(default_artifact_path(role, record.tile_id));
  return p.is_absolute() ? p : root / p;
}

// Throws MissingArtifactError naming every tile without a `role` file.
inline void require_artifacts(const PoolManifest& pool, const std::vector<std::string>& tiles, const std::string& role,
                              const fs::path& root) {
  std::vector<std::string> missing;
  for (const auto& id : tiles) {
    const PoolRecord* r = pool.find(id);
    if (!r || !fs::is_regular_file(resolve_artifact(*r, role, root))) missing.push_back(id);
  }
  if (!missing.empty()) throw MissingArtifactError(role, std::move(missing));
}

inline ArrayContainer load_artifact(const PoolManifest& pool, const std::string& tile_id, const std::string& role,
                                    const fs::path& root) {
  const PoolRecord* r = pool.find(tile_id);
  if (!r) throw validation_error("tile '" + tile_id + "' is not in the pool manifest");
  return load_array(resolve_artifact(*r, role, root));
}

inline std::vector<ScoreRecord> compute_prescores(const PoolManifest& pool, const std::vector<std::string>& tiles,
                                                  const fs::path& root) {
  require_artifacts(pool, tiles, "probmap", root);
  std::vector<ScoreRecord> out;
  out.reserve(tiles.size());
  for (const auto& id : tiles) {
    try {
      out.push_back({id, mean_response(load_artifact(pool, id, "probmap", root))});
    } catch (const Error& e) {
      throw Error(e.kind(), "tile '" + id + "': " + e.what());
    }
  }
  return out;
}

inline std::vector<ScoreRecord> compute_uncertainty(const PoolManifest& pool, const std::vector<std::string>& tiles,
                                                    const fs::path& root, std::uint32_t passes) {
  require_artifacts(pool, tiles, "dropout_stack", root);
  std::vector<ScoreRecord> out;
  out.reserve(tiles.size());
  for (const auto& id : tiles) {
    const auto stack = load_artifact(pool, id, "dropout_stack", root);
    if (stack.channels() != passes)
      throw validation_error("tile '" + id + "': dropout stack has " + std::to_string(stack.channels()) +
                             " passes, config expects " + std::to_string(passes));
    try {
      out.push_back({id, dropout_variance(stack)});
    } catch (const Error& e) {
      throw Error(e.kind(), "tile '" + id + "': " + e.what());
    }
  }
  return out;
}

inline std::vector<FeatureVector> compute_features(const PoolManifest& pool, const std::vector<std::string>& tiles,
                                                   const fs::path& root, std::uint32_t grid) {
  require_artifacts(pool, tiles, "features", root);
  std::vector<FeatureVector> out;
  out.reserve(tiles.size());
  for (const auto& id : tiles) {
    try {
      out.push_back({id, pool_features(load_artifact(pool, id, "features", root), grid)});
    } catch (const Error& e) {
      throw Error(e.kind(), "tile '" + id + "': " + e.what());
    }
  }
  return out;
}

// Optional precomputed inputs replace the per-tile artifact computations.
struct PipelineInputs {
  fs::path artifact_root;
  std::optional<std::vector<ScoreRecord>> prescores;
  std::optional<std::vector<ScoreRecord>> uncertainty;
  std::optional<std::vector<FeatureVector>> features;
  std::vector<std::string> labelled;  // excluded from selection; core-set seeds
};

struct PipelineResult {
  SelectionManifest selection;
  std::vector<ScoreRecord> prescores;        // every unlabelled pool tile
  std::vector<std::string> candidates;       // pre-selected, ranked
  std::vector<ScoreRecord> strategy_scores;  // uncertainty scores of the candidates
  std::optional<double> covering_radius;
  std::vector<std::string> outliers;
  std::size_t pool_size = 0;
  std::size_t labelled_count = 0;
  std::size_t negatives_short = 0;  // unlimited baseline: negatives that could not be supplied
};

namespace detail {

template <typename Record>
std::vector<Record> restrict_to(const std::vector<Record>& records, const std::vector<std::string>& wanted,
                                const std::string& role) {
  std::map<std::string, const Record*> by_id;
  for (const auto& r : records) by_id.emplace(r.tile_id, &r);
  std::vector<Record> out;
  std::vector<std::string> missing;
  for (const auto& id : wanted) {
    auto it = by_id.find(id);
    if (it == by_id.end())
      missing.push_back(id);
    else
      out.push_back(*it->second);
  }
  if (!missing.empty()) throw MissingArtifactError(role, std::move(missing));
  return out;
}

inline SelectionManifest unlimited_baseline(const RunConfig& cfg, const PoolManifest& pool,
                                            const std::vector<std::string>& remaining, PipelineResult& result) {
  std::vector<std::string> positives, negatives, unlabelled;
  for (const auto& id : remaining) {
    const auto& flag = pool.find(id)->positive;
    if (!flag)
      unlabelled.push_back(id);
    else
      (*flag ? positives : negatives).push_back(id);
  }
  if (!unlabelled.empty())
    throw validation_error("unlimited baseline needs 'positive' label metadata; missing for " +
                           std::to_string(unlabelled.size()) + " tile(s), first '" + unlabelled.front() + "'");
  const auto mix = build_training_mix(std::move(positives), std::move(negatives), cfg.positive_ratio, *cfg.seed);
  result.negatives_short = mix.negatives_wanted - mix.negatives_taken;
  SelectionManifest sel{Strategy::unlimited, cfg.budget, {}};
  for (const auto& id : mix.tiles) sel.append(id, std::nullopt);
  return sel;
}

}  // namespace detail

inline PipelineResult run_pipeline(const RunConfig& cfg, const PoolManifest& pool, const PipelineInputs& inputs) {
  cfg.validate();
  PipelineResult result;
  result.pool_size = pool.size();

  std::set<std::string> labelled(inputs.labelled.begin(), inputs.labelled.end());
  for (const auto& id : labelled)
    if (!pool.contains(id)) throw validation_error("labelled tile '" + id + "' is not in the pool manifest");
  result.labelled_count = labelled.size();

  std::vector<std::string> remaining;
  for (const auto& r : pool.records)
    if (!labelled.count(r.tile_id)) remaining.push_back(r.tile_id);
  if (remaining.empty()) throw Error(ErrorKind::pool_exhausted, "no unlabelled tiles remain in the pool");

  if (cfg.strategy == Strategy::unlimited) {
    result.selection = detail::unlimited_baseline(cfg, pool, remaining, result);
    return result;
  }

  result.prescores = inputs.prescores ? detail::restrict_to(*inputs.prescores, remaining, "prescore")
                                      : compute_prescores(pool, remaining, inputs.artifact_root);
  for (const auto& s : result.prescores)
    if (!(s.score >= 0.0 && s.score <= 1.0))
      throw validation_error("pre-selection score for '" + s.tile_id + "' is outside [0, 1]");
  result.candidates = preselect(result.prescores, cfg.preselect_fraction);
  if (cfg.budget > result.candidates.size())
    throw budget_error("budget " + std::to_string(cfg.budget) + " exceeds the " +
                       std::to_string(result.candidates.size()) + " pre-selected candidates (of " +
                       std::to_string(remaining.size()) + " unlabelled tiles)");

  switch (cfg.strategy) {
    case Strategy::random:
      result.selection = select_random(result.candidates, cfg.budget, *cfg.seed);
      break;
    case Strategy::uncertainty: {
      result.strategy_scores =
          inputs.uncertainty ? detail::restrict_to(*inputs.uncertainty, result.candidates, "uncertainty")
                             : compute_uncertainty(pool, result.candidates, inputs.artifact_root, cfg.dropout_passes);
      result.selection = rank_by_uncertainty(result.strategy_scores, cfg.budget);
      break;
    }
    case Strategy::coreset: {
      std::vector<std::string> needed = result.candidates;
      needed.insert(needed.end(), labelled.begin(), labelled.end());
      auto features = inputs.features ? detail::restrict_to(*inputs.features, needed, "features")
                                      : compute_features(pool, needed, inputs.artifact_root, cfg.pool_grid);
      const PointSet points(std::move(features), std::vector<std::string>(labelled.begin(), labelled.end()));
      const CoresetResult cs = cfg.outlier_budget == 0 ? kcenter_greedy(points, cfg.budget)
                                                       : robust_kcenter(points, cfg.budget, cfg.outlier_budget);
      result.selection = SelectionManifest{Strategy::coreset, cfg.budget, {}};
      for (std::size_t i = 0; i < cs.selected.size(); ++i) result.selection.append(cs.selected[i], cs.scores[i]);
      result.covering_radius = cs.covering_radius;
      result.outliers = cs.outliers;
      break;
    }
    case Strategy::unlimited:
      break;
  }
  validate_selection(result.selection, &pool);
  return result;
}

inline json run_metadata(const RunConfig& cfg, const PipelineResult& r) {
  json meta{{"config", cfg.to_json()},
            {"pool_size", r.pool_size},
            {"labelled", r.labelled_count},
            {"candidates", r.candidates.size()},
            {"selected", r.selection.entries.size()}};
  if (r.covering_radius) meta["covering_radius"] = *r.covering_radius;
  if (!r.outliers.empty()) meta["outliers"] = r.outliers;
  if (cfg.strategy == Strategy::unlimited) meta["negatives_short"] = r.negatives_short;
  return meta;
}

// Writes selection.jsonl, run.json and the intermediate score files.
inline void write_run_outputs(const RunConfig& cfg, const PipelineResult& r, const fs::path& dir) {
  fs::create_directories(dir);
  write_selection(r.selection, dir / "selection.jsonl");
  if (!r.prescores.empty()) write_scores(r.prescores, dir / "prescores.jsonl");
  if (!r.candidates.empty()) {
    auto out = detail::open_for_write(dir / "candidates.jsonl");
    for (const auto& id : r.candidates) out << json{{"tile_id", id}}.dump() << '\n';
    detail::finish(out, dir / "candidates.jsonl");
  }
  if (!r.strategy_scores.empty()) write_scores(r.strategy_scores, dir / "uncertainty.jsonl");
  auto out = detail::open_for_write(dir / "run.json");
  out << run_metadata(cfg, r).dump(2) << '\n';
  detail::finish(out, dir / "run.json");
}

// Single-writer guard for a run directory.
class RunDirLock {
 public:
  explicit RunDirLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) throw validation_error("run directory " + dir.string() + " is locked by another run (" + path_.string() + ")");
    std::fclose(f);
  }
  ~RunDirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunDirLock(const RunDirLock&) = delete;
  RunDirLock& operator=(const RunDirLock&) = delete;

 private:
  fs::path path_;
};

struct RoundRecord {
  std::uint64_t round_index = 0;
  SelectionManifest selection;
  std::vector<std::string> cumulative_labelled;  // sorted
  std::optional<std::string> eval;               // path of an EvalReport
};

// One more round: previously labelled tiles are excluded and seed the core-set.
inline RoundRecord run_round(const std::vector<RoundRecord>& state, const RunConfig& cfg, const PoolManifest& pool,
                             PipelineInputs inputs, PipelineResult* detail_out = nullptr) {
  std::set<std::string> labelled(inputs.labelled.begin(), inputs.labelled.end());
  if (!state.empty()) labelled.insert(state.back().cumulative_labelled.begin(), state.back().cumulative_labelled.end());
  std::size_t remaining = 0;
  for (const auto& r : pool.records) remaining += labelled.count(r.tile_id) ? 0 : 1;
  if (remaining == 0 || (cfg.strategy != Strategy::unlimited && cfg.budget > remaining))
    throw Error(ErrorKind::pool_exhausted, "pool exhausted: " + std::to_string(remaining) +
                                               " unlabelled tile(s) left, budget is " + std::to_string(cfg.budget));

  inputs.labelled.assign(labelled.begin(), labelled.end());
  PipelineResult result = run_pipeline(cfg, pool, inputs);

  RoundRecord rec;
  rec.round_index = state.empty() ? 0 : state.back().round_index + 1;
  rec.selection = result.selection;
  for (const auto& e : rec.selection.entries)
    if (!labelled.insert(e.tile_id).second)
      throw validation_error("tile '" + e.tile_id + "' was already selected in an earlier round");
  rec.cumulative_labelled.assign(labelled.begin(), labelled.end());
  if (detail_out) *detail_out = std::move(result);
  return rec;
}

// rounds.jsonl holds one line per round; each selection lives in
// round_<index>/selection.jsonl under the state directory.
inline fs::path round_dir(const fs::path& state_dir, std::uint64_t index) {
  char name[32];
  std::snprintf(name, sizeof name, "round_%03llu", static_cast<unsigned long long>(index));
  return state_dir / name;
}

inline std::vector<RoundRecord> read_round_log(const fs::path& state_dir) {
  std::vector<RoundRecord> rounds;
  const fs::path log = state_dir / "rounds.jsonl";
  if (!fs::exists(log)) return rounds;
  auto in = detail::open_for_read(log);
  detail::for_each_json_line(in, [&](const json& j, std::size_t lineno) {
    RoundRecord r;
    try {
      r.round_index = j.at("round_index").get<std::uint64_t>();
      r.cumulative_labelled = j.at("cumulative_labelled").get<std::vector<std::string>>();
      if (j.contains("eval") && !j["eval"].is_null()) r.eval = j["eval"].get<std::string>();
    } catch (const json::exception& e) {
      throw ManifestError(lineno, e.what());
    }
    r.selection = read_selection(state_dir / detail::required_string(j, "selection", lineno));
    if (r.round_index != rounds.size())
      throw ManifestError(lineno, "round_index " + std::to_string(r.round_index) + " out of sequence");
    rounds.push_back(std::move(r));
  });
  return rounds;
}

inline void append_round_log(const fs::path& state_dir, const RoundRecord& r) {
  const fs::path rel = round_dir("", r.round_index) / "selection.jsonl";
  fs::create_directories(state_dir / rel.parent_path());
  write_selection(r.selection, state_dir / rel);
  json line{{"round_index", r.round_index},
            {"selection", rel.generic_string()},
            {"cumulative_labelled", r.cumulative_labelled},
            {"eval", r.eval ? json(*r.eval) : json(nullptr)}};
  std::ofstream out(state_dir / "rounds.jsonl", std::ios::binary | std::ios::app);
  if (!out) throw storage_error("cannot append to " + (state_dir / "rounds.jsonl").string());
  out << line.dump() << '\n';
  detail::finish(out, state_dir / "rounds.jsonl");
}

struct Comparison {
  PRPoint baseline;
  PRPoint candidate;
  double delta_precision = 0.0;
  double delta_recall = 0.0;
  double delta_f1 = 0.0;
};

// Each report contributes its own operating point.
inline Comparison compare_reports(const EvalReport& baseline, const EvalReport& candidate) {
  if (baseline.tiles != candidate.tiles)
    throw validation_error("reports were computed on different test tile sets");
  Comparison c{baseline.operating, candidate.operating, 0.0, 0.0, 0.0};
  c.delta_precision = candidate.operating.precision - baseline.operating.precision;
  c.delta_recall = candidate.operating.recall - baseline.operating.recall;
  c.delta_f1 = candidate.operating.f1 - baseline.operating.f1;
  return c;
}

// Percentage points with one decimal and an explicit sign: 0.08 -> "+8.0%".
inline std::string format_gain(double delta) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f%%", delta * 100.0);
  std::string s = buf;
  if (s == "-0.0%") s = "+0.0%";
  return s;
}

inline std::string format_comparison(const Comparison& c) {
  auto row = [](const char* name, double a, double b, double d) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-10s %9.4f %9.4f %8s\n", name, a, b, format_gain(d).c_str());
    return std::string(buf);
  };
  std::string out;
  char head[96];
  std::snprintf(head, sizeof head, "%-10s %9s %9s %8s\n", "metric", "baseline", "candidate", "gain");
  out += head;
  char thr[96];
  std::snprintf(thr, sizeof thr, "%-10s %9.4f %9.4f\n", "threshold", c.baseline.threshold, c.candidate.threshold);
  out += thr;
  out += row("precision", c.baseline.precision, c.candidate.precision, c.delta_precision);
  out += row("recall", c.baseline.recall, c.candidate.recall, c.delta_recall);
  out += row("f1", c.baseline.f1, c.candidate.f1, c.delta_f1);
  return out;
}

}  // namespace alctl
