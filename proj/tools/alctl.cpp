// alctl: active-learning tile selection from the command line.
//
// Exit codes: 0 success, 2 validation error, 3 missing artifacts,
// 4 budget / pool errors.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "alctl/alctl.hpp"

namespace fs = std::filesystem;
using namespace alctl;

namespace {

// Flags that mirror RunConfig keys; unset flags leave the config file value.
struct ConfigFlags {
  std::string config_file;
  std::optional<std::string> strategy;
  std::optional<std::uint64_t> budget;
  std::optional<double> preselect_fraction;
  std::optional<std::uint32_t> dropout_passes;
  std::optional<std::uint32_t> pool_grid;
  std::optional<std::uint32_t> tile_size;
  std::optional<std::uint64_t> outlier_budget;
  std::optional<std::uint64_t> seed;
  std::optional<double> positive_ratio;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value run configuration file");
    app->add_option("--strategy", strategy, "random | uncertainty | coreset | unlimited");
    app->add_option("--budget", budget, "labelling budget (tiles)");
    app->add_option("--preselect-fraction", preselect_fraction, "fraction kept by mean-response pre-selection");
    app->add_option("--dropout-passes", dropout_passes, "stochastic passes per dropout stack");
    app->add_option("--pool-grid", pool_grid, "max-pooling grid size");
    app->add_option("--tile-size", tile_size, "tile edge in pixels");
    app->add_option("--outlier-budget", outlier_budget, "points the robust core-set may ignore");
    app->add_option("--seed", seed, "64-bit seed for random sampling");
    app->add_option("--positive-ratio", positive_ratio, "positive share of the unlimited baseline mix");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_file.empty()) apply_config_file(cfg, config_file);
    if (strategy) cfg.strategy = parse_strategy(*strategy);
    if (budget) cfg.budget = *budget;
    if (preselect_fraction) cfg.preselect_fraction = *preselect_fraction;
    if (dropout_passes) cfg.dropout_passes = *dropout_passes;
    if (pool_grid) cfg.pool_grid = *pool_grid;
    if (tile_size) cfg.tile_size = *tile_size;
    if (outlier_budget) cfg.outlier_budget = *outlier_budget;
    if (seed) cfg.seed = *seed;
    if (positive_ratio) cfg.positive_ratio = *positive_ratio;
    return cfg;
  }
};

// Inputs shared by `select` and `round`.
struct SelectionFlags {
  std::string pool;
  std::string prescores;
  std::string uncertainty;
  std::string features;
  std::string feature_rows;
  std::string labelled;

  void attach(CLI::App* app) {
    app->add_option("--pool", pool, "pool manifest (JSONL)")->required();
    app->add_option("--prescores", prescores, "precomputed mean-response scores (JSONL) instead of probmaps");
    app->add_option("--uncertainty", uncertainty, "precomputed uncertainty scores (JSONL) instead of dropout stacks");
    app->add_option("--features", features, "pooled feature matrix (ALF1, N x C x 1) instead of feature maps");
    app->add_option("--feature-rows", feature_rows, "row -> tile_id map for --features (JSONL)");
    app->add_option("--labelled", labelled, "already-labelled tiles (JSONL with tile_id)");
  }

  PipelineInputs load(const fs::path& artifact_root) const {
    PipelineInputs in;
    in.artifact_root = artifact_root;
    if (!prescores.empty()) in.prescores = read_scores(prescores);
    if (!uncertainty.empty()) in.uncertainty = read_scores(uncertainty);
    if (features.empty() != feature_rows.empty())
      throw validation_error("--features and --feature-rows must be given together");
    if (!features.empty()) in.features = alctl::feature_rows(load_array(features), read_feature_row_map(feature_rows));
    if (!labelled.empty()) in.labelled = read_tile_list(labelled);
    return in;
  }

  static std::vector<std::string> read_feature_row_map(const fs::path& path) {
    auto in = detail::open_for_read(path);
    std::vector<std::string> ids;
    detail::for_each_json_line(in, [&](const json& j, std::size_t lineno) {
      auto row = j.find("row");
      if (row == j.end() || !row->is_number_unsigned() || row->get<std::size_t>() != ids.size())
        throw ManifestError(lineno, "expected row " + std::to_string(ids.size()));
      ids.push_back(detail::required_string(j, "tile_id", lineno));
    });
    return ids;
  }
};

std::vector<std::string> candidate_tiles(const PoolManifest& pool, const std::string& prescores_path, double fraction) {
  if (prescores_path.empty()) return pool.tile_ids();
  auto scores = read_scores(prescores_path);
  std::vector<ScoreRecord> in_pool;
  for (auto& s : scores)
    if (pool.contains(s.tile_id)) in_pool.push_back(std::move(s));
  auto ids = preselect(std::move(in_pool), fraction);
  std::sort(ids.begin(), ids.end());
  return ids;
}

void write_feature_outputs(const std::vector<FeatureVector>& rows, const fs::path& matrix_path,
                           const fs::path& rows_path) {
  store_array(feature_matrix(rows), matrix_path);
  auto out = detail::open_for_write(rows_path);
  for (std::size_t i = 0; i < rows.size(); ++i) out << json{{"row", i}, {"tile_id", rows[i].tile_id}}.dump() << '\n';
  detail::finish(out, rows_path);
}

std::map<std::string, ArrayContainer> load_role(const PoolManifest& m, const std::string& role, const fs::path& root) {
  require_artifacts(m, m.tile_ids(), role, root);
  std::map<std::string, ArrayContainer> out;
  for (const auto& r : m.records) out.emplace(r.tile_id, load_artifact(m, r.tile_id, role, root));
  return out;
}

std::vector<double> parse_thresholds(const std::string& text) {
  if (text.empty()) return default_thresholds();
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw validation_error("cannot parse threshold '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active-learning tile selection for tiled raster imagery"};
  app.require_subcommand(1);
  std::string artifact_root = ".";
  app.add_option("--artifact-root", artifact_root, "root for relative artifact paths")->envname("ALCTL_ARTIFACT_ROOT");

  // tile
  auto* tile = app.add_subcommand("tile", "split rasters (RasterMeta JSONL) into a pool manifest");
  std::string rasters_path, tile_out;
  ConfigFlags tile_cfg;
  tile->add_option("--rasters", rasters_path, "RasterMeta JSONL {image_id, height, width}")->required();
  tile->add_option("--out", tile_out, "pool manifest to write")->required();
  tile->add_option("--config", tile_cfg.config_file, "run configuration file");
  tile->add_option("--tile-size", tile_cfg.tile_size, "tile edge in pixels");

  // prescore
  auto* prescore = app.add_subcommand("prescore", "mean-response score per tile from its probmap");
  std::string pre_pool, pre_out;
  prescore->add_option("--pool", pre_pool, "pool manifest")->required();
  prescore->add_option("--out", pre_out, "score JSONL to write")->required();

  // score-uncertainty
  auto* unc = app.add_subcommand("score-uncertainty", "MC-dropout variance score per tile from its dropout stack");
  std::string unc_pool, unc_out, unc_prescores;
  ConfigFlags unc_cfg;
  unc->add_option("--pool", unc_pool, "pool manifest")->required();
  unc->add_option("--out", unc_out, "score JSONL to write")->required();
  unc->add_option("--prescores", unc_prescores, "restrict to tiles kept by pre-selection over these scores");
  unc->add_option("--config", unc_cfg.config_file, "run configuration file");
  unc->add_option("--dropout-passes", unc_cfg.dropout_passes, "expected passes per stack");
  unc->add_option("--preselect-fraction", unc_cfg.preselect_fraction, "pre-selection fraction");

  // pool-features
  auto* feat = app.add_subcommand("pool-features", "pool decoder feature maps into a feature matrix");
  std::string feat_pool, feat_matrix, feat_rows, feat_prescores;
  ConfigFlags feat_cfg;
  feat->add_option("--pool", feat_pool, "pool manifest")->required();
  feat->add_option("--out-matrix", feat_matrix, "ALF1 N x C x 1 matrix to write")->required();
  feat->add_option("--out-rows", feat_rows, "row -> tile_id JSONL to write")->required();
  feat->add_option("--prescores", feat_prescores, "restrict to tiles kept by pre-selection over these scores");
  feat->add_option("--config", feat_cfg.config_file, "run configuration file");
  feat->add_option("--pool-grid", feat_cfg.pool_grid, "max-pooling grid size");
  feat->add_option("--preselect-fraction", feat_cfg.preselect_fraction, "pre-selection fraction");

  // select
  auto* select = app.add_subcommand("select", "run pre-selection and a strategy, write a selection manifest");
  ConfigFlags sel_cfg;
  SelectionFlags sel_in;
  std::string run_dir;
  sel_cfg.attach(select);
  sel_in.attach(select);
  select->add_option("--run-dir", run_dir, "output directory (selection.jsonl, run.json, score files)")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "object-level PR curve over test tiles");
  std::string eval_tiles, eval_out, eval_csv, eval_thresholds;
  evaluate->add_option("--tiles", eval_tiles, "manifest of test tiles with probmap and gt artifacts")->required();
  evaluate->add_option("--out", eval_out, "EvalReport JSON to write")->required();
  evaluate->add_option("--csv", eval_csv, "PR curve CSV to write");
  evaluate->add_option("--thresholds", eval_thresholds, "comma-separated thresholds (default 0.01..0.99)");

  // report
  auto* report = app.add_subcommand("report", "compare two evaluation reports at their operating points");
  std::string rep_a, rep_b, rep_out, rep_csv;
  report->add_option("--baseline", rep_a, "baseline EvalReport JSON")->required();
  report->add_option("--candidate", rep_b, "candidate EvalReport JSON")->required();
  report->add_option("--out", rep_out, "comparison table to write (default stdout)");
  report->add_option("--csv", rep_csv, "combined PR curve CSV to write");

  // round
  auto* round = app.add_subcommand("round", "run one more active-learning round over a state directory");
  ConfigFlags round_cfg;
  SelectionFlags round_in;
  std::string state_dir, round_eval;
  round_cfg.attach(round);
  round_in.attach(round);
  round->add_option("--state-dir", state_dir, "round state directory (rounds.jsonl)")->required();
  round->add_option("--eval", round_eval, "EvalReport to attach to this round");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*tile) {
      const RunConfig cfg = tile_cfg.resolve();
      std::vector<TileGrid> grids;
      for (const auto& r : read_rasters(rasters_path)) grids.push_back(build_tile_grid(r, cfg.tile_size));
      const auto pool = to_pool_manifest(grids);
      write_manifest(pool, fs::path(tile_out));
      std::cerr << "tile: " << pool.size() << " tiles from " << grids.size() << " raster(s)\n";
    } else if (*prescore) {
      const auto pool = read_manifest(pre_pool);
      write_scores(compute_prescores(pool, pool.tile_ids(), artifact_root), fs::path(pre_out));
    } else if (*unc) {
      const RunConfig cfg = unc_cfg.resolve();
      const auto pool = read_manifest(unc_pool);
      const auto tiles = candidate_tiles(pool, unc_prescores, cfg.preselect_fraction);
      write_scores(compute_uncertainty(pool, tiles, artifact_root, cfg.dropout_passes), fs::path(unc_out));
    } else if (*feat) {
      const RunConfig cfg = feat_cfg.resolve();
      const auto pool = read_manifest(feat_pool);
      const auto tiles = candidate_tiles(pool, feat_prescores, cfg.preselect_fraction);
      write_feature_outputs(compute_features(pool, tiles, artifact_root, cfg.pool_grid), feat_matrix, feat_rows);
    } else if (*select) {
      const RunConfig cfg = sel_cfg.resolve();
      cfg.validate();
      const auto pool = read_manifest(sel_in.pool);
      const auto inputs = sel_in.load(artifact_root);
      RunDirLock lock(run_dir);
      const auto result = run_pipeline(cfg, pool, inputs);
      write_run_outputs(cfg, result, run_dir);
      if (result.negatives_short > 0)
        std::cerr << "warning: " << result.negatives_short << " negative tile(s) short of the requested ratio\n";
      std::cerr << "select: " << result.selection.entries.size() << " tiles (" << strategy_name(cfg.strategy)
                << ") -> " << (fs::path(run_dir) / "selection.jsonl").string() << "\n";
    } else if (*evaluate) {
      const auto tiles = read_manifest(eval_tiles);
      const auto rep = pr_curve(load_role(tiles, "probmap", artifact_root), load_role(tiles, "gt", artifact_root),
                                parse_thresholds(eval_thresholds));
      write_report(rep, eval_out);
      if (!eval_csv.empty()) {
        auto out = detail::open_for_write(eval_csv);
        write_curve_csv({{"model", &rep}}, out);
        detail::finish(out, eval_csv);
      }
      std::cerr << "evaluate: operating threshold " << rep.operating.threshold << ", f1 " << rep.operating.f1 << "\n";
    } else if (*report) {
      const auto a = read_report(rep_a);
      const auto b = read_report(rep_b);
      const auto table = format_comparison(compare_reports(a, b));
      if (rep_out.empty()) {
        std::cout << table;
      } else {
        auto out = detail::open_for_write(rep_out);
        out << table;
        detail::finish(out, rep_out);
      }
      if (!rep_csv.empty()) {
        auto out = detail::open_for_write(rep_csv);
        write_curve_csv({{"baseline", &a}, {"candidate", &b}}, out);
        detail::finish(out, rep_csv);
      }
    } else if (*round) {
      const RunConfig cfg = round_cfg.resolve();
      cfg.validate();
      const auto pool = read_manifest(round_in.pool);
      const auto inputs = round_in.load(artifact_root);
      RunDirLock lock(state_dir);
      const auto history = read_round_log(state_dir);
      PipelineResult detail_result;
      auto rec = run_round(history, cfg, pool, inputs, &detail_result);
      if (!round_eval.empty()) rec.eval = round_eval;
      write_run_outputs(cfg, detail_result, round_dir(state_dir, rec.round_index));
      append_round_log(state_dir, rec);
      std::cerr << "round " << rec.round_index << ": " << rec.selection.entries.size() << " selected, "
                << rec.cumulative_labelled.size() << " labelled in total\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
