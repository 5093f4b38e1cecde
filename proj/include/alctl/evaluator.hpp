#pragma once

// Object-level detection metrics for segmentation output.
//
// A ground-truth instance counts as detected when at least one of its pixels
// is predicted positive. The binarized prediction is split into 8-connected
// components; a component overlapping no ground-truth pixel is a false
// positive. Sweeping the binarization threshold yields the PR curve, and the
// operating point is the threshold with the best F1.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "alctl/array_store.hpp"
#include "alctl/errors.hpp"
#include "alctl/manifest.hpp"
#include "alctl/scorer.hpp"

namespace alctl {

struct BinaryMask {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint8_t> data;  // row-major, 1 = positive

  std::size_t positives() const { return static_cast<std::size_t>(std::count(data.begin(), data.end(), 1)); }
};

struct LabelMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::uint32_t> labels;  // 0 = background, 1..count
  std::uint32_t count = 0;
};

struct MatchCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const MatchCounts&, const MatchCounts&) = default;
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct PRPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  MatchCounts counts;
};

struct EvalReport {
  std::vector<std::string> tiles;  // evaluated tile ids, sorted
  std::vector<PRPoint> curve;      // ascending threshold
  PRPoint operating;
};

inline void check_threshold(double t) {
  if (!(t > 0.0 && t < 1.0)) throw validation_error("threshold must lie in (0, 1), got " + std::to_string(t));
}

// 0.01, 0.02, ..., 0.99
inline std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int i = 1; i <= 99; ++i) t.push_back(i / 100.0);
  return t;
}

inline BinaryMask binarize(const ArrayContainer& map, double threshold) {
  check_threshold(threshold);
  if (map.channels() != 1)
    throw validation_error("probability map must have 1 channel, got " + std::to_string(map.channels()));
  const auto values = map.f32();
  check_probabilities(values, "probability map");
  BinaryMask mask{map.height(), map.width(), std::vector<std::uint8_t>(values.size())};
  for (std::size_t i = 0; i < values.size(); ++i) mask.data[i] = static_cast<double>(values[i]) >= threshold ? 1 : 0;
  return mask;
}

// Two-pass union-find labelling, 8-connectivity. Labels are renumbered in
// order of each component's first pixel in row-major scan.
inline LabelMap connected_components(const BinaryMask& mask) {
  const std::size_t h = mask.height;
  const std::size_t w = mask.width;
  if (mask.data.size() != h * w) throw validation_error("mask data does not match its dimensions");

  LabelMap out{mask.height, mask.width, std::vector<std::uint32_t>(h * w, 0), 0};
  std::vector<std::uint32_t> parent{0};
  auto find = [&](std::uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  auto unite = [&](std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  };

  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      if (!mask.data[r * w + c]) continue;
      std::uint32_t label = 0;
      auto visit = [&](std::size_t rr, std::size_t cc) {
        const std::uint32_t n = out.labels[rr * w + cc];
        if (n == 0) return;
        if (label == 0)
          label = n;
        else
          unite(label, n);
      };
      if (c > 0) visit(r, c - 1);
      if (r > 0) {
        if (c > 0) visit(r - 1, c - 1);
        visit(r - 1, c);
        if (c + 1 < w) visit(r - 1, c + 1);
      }
      if (label == 0) {
        label = static_cast<std::uint32_t>(parent.size());
        parent.push_back(label);
      }
      out.labels[r * w + c] = label;
    }

  std::vector<std::uint32_t> final_id(parent.size(), 0);
  for (auto& l : out.labels) {
    if (l == 0) continue;
    const std::uint32_t root = find(l);
    if (final_id[root] == 0) final_id[root] = ++out.count;
    l = final_id[root];
  }
  return out;
}

inline MatchCounts match_detections(const LabelMap& pred, const ArrayContainer& gt) {
  if (gt.channels() != 1) throw validation_error("instance map must have 1 channel");
  if (gt.height() != pred.height || gt.width() != pred.width)
    throw validation_error("prediction is " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                           " but ground truth is " + std::to_string(gt.height()) + "x" + std::to_string(gt.width()));
  const auto ids = gt.u32();
  std::unordered_map<std::uint32_t, bool> detected;
  std::vector<char> component_hits(std::size_t{pred.count} + 1, 0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::uint32_t inst = ids[i];
    const std::uint32_t comp = pred.labels[i];
    if (inst != 0) {
      bool& hit = detected[inst];
      if (comp != 0) {
        hit = true;
        component_hits[comp] = 1;
      }
    }
  }
  MatchCounts m;
  for (const auto& [id, hit] : detected) (hit ? m.tp : m.fn) += 1;
  for (std::uint32_t c = 1; c <= pred.count; ++c)
    if (!component_hits[c]) ++m.fp;
  return m;
}

inline Metrics precision_recall_f1(const MatchCounts& c) {
  Metrics m;
  m.precision = c.tp + c.fp == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  m.recall = c.tp + c.fn == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

inline MatchCounts evaluate_tile(const ArrayContainer& prob, const ArrayContainer& gt, double threshold) {
  return match_detections(connected_components(binarize(prob, threshold)), gt);
}

inline PRPoint make_point(double threshold, const MatchCounts& counts) {
  const Metrics m = precision_recall_f1(counts);
  return {threshold, m.precision, m.recall, m.f1, counts};
}

// Highest F1; the lower threshold wins ties.
inline PRPoint operating_point(const std::vector<PRPoint>& curve) {
  if (curve.empty()) throw validation_error("empty PR curve");
  const PRPoint* best = &curve.front();
  for (const auto& p : curve)
    if (p.f1 > best->f1) best = &p;
  return *best;
}

inline EvalReport pr_curve(const std::map<std::string, ArrayContainer>& prob_maps,
                           const std::map<std::string, ArrayContainer>& gt_maps,
                           std::vector<double> thresholds = default_thresholds()) {
  if (prob_maps.size() != gt_maps.size() ||
      !std::equal(prob_maps.begin(), prob_maps.end(), gt_maps.begin(),
                  [](const auto& a, const auto& b) { return a.first == b.first; }))
    throw validation_error("probability maps and ground truth cover different tile sets");
  if (thresholds.empty()) throw validation_error("threshold list is empty");
  for (double t : thresholds) check_threshold(t);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  EvalReport report;
  for (const auto& [id, _] : prob_maps) report.tiles.push_back(id);
  for (double t : thresholds) {
    MatchCounts total;
    for (const auto& [id, prob] : prob_maps) total += evaluate_tile(prob, gt_maps.at(id), t);
    report.curve.push_back(make_point(t, total));
  }
  report.operating = operating_point(report.curve);
  return report;
}

inline json to_json(const PRPoint& p) {
  return json{{"threshold", p.threshold}, {"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1},
              {"tp", p.counts.tp},        {"fp", p.counts.fp},        {"fn", p.counts.fn}};
}

inline PRPoint point_from_json(const json& j) {
  try {
    PRPoint p;
    p.threshold = j.at("threshold").get<double>();
    p.precision = j.at("precision").get<double>();
    p.recall = j.at("recall").get<double>();
    p.f1 = j.at("f1").get<double>();
    p.counts = {j.at("tp").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(), j.at("fn").get<std::uint64_t>()};
    return p;
  } catch (const json::exception& e) {
    throw validation_error(std::string("malformed PR point: ") + e.what());
  }
}

inline json to_json(const EvalReport& r) {
  json curve = json::array();
  for (const auto& p : r.curve) curve.push_back(to_json(p));
  return json{{"tiles", r.tiles}, {"curve", curve}, {"operating", to_json(r.operating)}};
}

inline EvalReport report_from_json(const json& j) {
  EvalReport r;
  try {
    r.tiles = j.at("tiles").get<std::vector<std::string>>();
    for (const auto& p : j.at("curve")) r.curve.push_back(point_from_json(p));
    r.operating = point_from_json(j.at("operating"));
  } catch (const json::exception& e) {
    throw validation_error(std::string("malformed evaluation report: ") + e.what());
  }
  return r;
}

inline void write_report(const EvalReport& r, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  out << to_json(r).dump(2) << '\n';
  detail::finish(out, path);
}

inline EvalReport read_report(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  try {
    return report_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw validation_error(path.string() + ": " + e.what());
  }
}

inline void write_curve_csv(const std::vector<std::pair<std::string, const EvalReport*>>& reports, std::ostream& out) {
  out << "report,threshold,precision,recall,f1,tp,fp,fn\n";
  for (const auto& [name, r] : reports)
    for (const auto& p : r->curve)
      out << name << ',' << json(p.threshold).dump() << ',' << json(p.precision).dump() << ','
          << json(p.recall).dump() << ',' << json(p.f1).dump() << ',' << p.counts.tp << ',' << p.counts.fp << ','
          << p.counts.fn << '\n';
}

}  // namespace alctl
