#pragma once

// Core-set selection in feature space.
//
// kcenter_greedy is farthest-first traversal (2-approximation of k-center).
// robust_kcenter tolerates a fixed number of outliers: it binary-searches a
// set of candidate radii, and for each radius runs a greedy disk cover
// (pick the point whose r-ball holds the most uncovered points, then mark its
// 3r-ball covered) that may leave up to `outlier_budget` points uncovered.
//
// Already-labelled points (seeds) act as fixed centers and are never selected.
// All distances are computed in double precision. Ties resolve to the lowest
// index, which is the smallest tile_id because PointSet is kept sorted.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alctl/errors.hpp"
#include "alctl/pooler.hpp"

namespace alctl {

inline constexpr std::uint64_t kDefaultOutlierBudget = 0;

inline double squared_l2(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw dimension_error("vector lengths differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

inline double l2_distance(std::span<const double> a, std::span<const double> b) { return std::sqrt(squared_l2(a, b)); }

class PointSet {
 public:
  PointSet() = default;

  // Points are reordered canonically by tile_id; seed ids must be present.
  PointSet(std::vector<FeatureVector> points, const std::vector<std::string>& seed_ids = {}) {
    std::sort(points.begin(), points.end(),
              [](const FeatureVector& a, const FeatureVector& b) { return a.tile_id < b.tile_id; });
    if (!points.empty()) dims_ = points.front().values.size();
    ids_.reserve(points.size());
    data_.reserve(points.size() * dims_);
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto& p = points[i];
      if (p.values.size() != dims_)
        throw dimension_error("point '" + p.tile_id + "' has " + std::to_string(p.values.size()) +
                              " components, expected " + std::to_string(dims_));
      if (i > 0 && p.tile_id == ids_.back()) throw validation_error("duplicate tile_id '" + p.tile_id + "' in point set");
      for (double v : p.values)
        if (!std::isfinite(v)) throw validation_error("point '" + p.tile_id + "' has a non-finite component");
      ids_.push_back(std::move(p.tile_id));
      data_.insert(data_.end(), p.values.begin(), p.values.end());
    }
    seed_.assign(ids_.size(), 0);
    for (const auto& s : seed_ids) seed_[index_of(s)] = 1;
  }

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dims() const noexcept { return dims_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::span<const double> point(std::size_t i) const { return {data_.data() + i * dims_, dims_}; }
  bool is_seed(std::size_t i) const { return seed_[i] != 0; }

  std::size_t seed_count() const { return static_cast<std::size_t>(std::count(seed_.begin(), seed_.end(), 1)); }
  std::size_t unlabelled_count() const { return size() - seed_count(); }

  std::size_t index_of(const std::string& tile_id) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), tile_id);
    if (it == ids_.end() || *it != tile_id) throw validation_error("unknown tile_id '" + tile_id + "' in point set");
    return static_cast<std::size_t>(it - ids_.begin());
  }

  double squared_distance(std::size_t i, std::size_t j) const {
    const double* a = data_.data() + i * dims_;
    const double* b = data_.data() + j * dims_;
    double sum = 0.0;
    for (std::size_t d = 0; d < dims_; ++d) {
      const double diff = a[d] - b[d];
      sum += diff * diff;
    }
    return sum;
  }

 private:
  std::vector<std::string> ids_;
  std::vector<double> data_;
  std::vector<char> seed_;
  std::size_t dims_ = 0;
};

struct CoresetResult {
  std::vector<std::string> selected;          // selection order
  std::vector<std::optional<double>> scores;  // distance to the center set at selection time
  double covering_radius = 0.0;
  std::vector<std::string> outliers;
};

namespace detail {

// Index of the largest value among eligible entries; lowest index on ties.
inline std::size_t argmax_eligible(std::span<const double> values, std::span<const char> eligible) {
  std::size_t best = values.size();
  for (std::size_t i = 0; i < values.size(); ++i)
    if (eligible[i] && (best == values.size() || values[i] > values[best])) best = i;
  return best;
}

inline void relax(const PointSet& pts, std::size_t center, std::vector<double>& min_d2) {
  for (std::size_t i = 0; i < pts.size(); ++i) min_d2[i] = std::min(min_d2[i], pts.squared_distance(center, i));
}

inline std::size_t closest_to_centroid(const PointSet& pts, std::span<const char> eligible) {
  std::vector<double> centroid(pts.dims(), 0.0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto p = pts.point(i);
    for (std::size_t d = 0; d < pts.dims(); ++d) centroid[d] += p[d];
  }
  for (auto& c : centroid) c /= static_cast<double>(pts.size());
  std::size_t best = pts.size();
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!eligible[i]) continue;
    const double d2 = squared_l2(pts.point(i), centroid);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

inline void check_selection_size(const PointSet& pts, std::uint64_t k) {
  if (pts.size() == 0) throw validation_error("point set is empty");
  if (k == 0) throw validation_error("k must be positive");
  if (k > pts.unlabelled_count())
    throw budget_error("k = " + std::to_string(k) + " exceeds the " + std::to_string(pts.unlabelled_count()) +
                       " unlabelled points");
}

// Farthest-first traversal extending `chosen`; appends until it holds k picks.
inline void farthest_first(const PointSet& pts, std::uint64_t k, std::vector<std::size_t>& chosen,
                           std::vector<std::optional<double>>& scores) {
  std::vector<double> min_d2(pts.size(), std::numeric_limits<double>::infinity());
  std::vector<char> eligible(pts.size(), 1);
  bool any_center = false;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (pts.is_seed(i)) {
      eligible[i] = 0;
      relax(pts, i, min_d2);
      any_center = true;
    }
  for (auto c : chosen) {
    eligible[c] = 0;
    relax(pts, c, min_d2);
    any_center = true;
  }
  if (!any_center && chosen.size() < k) {
    const std::size_t first = closest_to_centroid(pts, eligible);
    chosen.push_back(first);
    scores.push_back(std::nullopt);
    eligible[first] = 0;
    relax(pts, first, min_d2);
  }
  while (chosen.size() < k) {
    const std::size_t next = argmax_eligible(min_d2, eligible);
    chosen.push_back(next);
    scores.push_back(std::sqrt(min_d2[next]));
    eligible[next] = 0;
    relax(pts, next, min_d2);
  }
}

inline std::vector<double> distances_to_centers(const PointSet& pts, std::span<const std::size_t> centers) {
  std::vector<double> min_d2(pts.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (pts.is_seed(i)) relax(pts, i, min_d2);
  for (auto c : centers) relax(pts, c, min_d2);
  return min_d2;
}

// Squared distances; a dense matrix below `kDenseLimit` points, recomputed otherwise.
class DistanceTable {
 public:
  static constexpr std::size_t kDenseLimit = 2000;

  explicit DistanceTable(const PointSet& pts) : pts_(pts) {
    if (pts.size() <= kDenseLimit) {
      const std::size_t n = pts.size();
      dense_.resize(n * n);
      for (std::size_t i = 0; i < n; ++i) {
        dense_[i * n + i] = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) dense_[i * n + j] = dense_[j * n + i] = pts.squared_distance(i, j);
      }
    }
  }

  bool dense() const noexcept { return !dense_.empty(); }

  double d2(std::size_t i, std::size_t j) const {
    return dense() ? dense_[i * pts_.size() + j] : pts_.squared_distance(i, j);
  }

 private:
  const PointSet& pts_;
  std::vector<double> dense_;
};

struct Assignment {
  std::vector<std::size_t> centers;
  std::vector<std::optional<double>> scores;
  std::vector<std::size_t> outliers;
  double radius = 0.0;
};

// Discards the `outlier_budget` farthest points (positive distance only).
inline Assignment assess(const PointSet& pts, std::vector<std::size_t> centers,
                         std::vector<std::optional<double>> scores, std::uint64_t outlier_budget) {
  const auto min_d2 = distances_to_centers(pts, centers);
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return min_d2[a] > min_d2[b]; });
  Assignment out{std::move(centers), std::move(scores), {}, 0.0};
  std::size_t i = 0;
  for (; i < order.size() && out.outliers.size() < outlier_budget && min_d2[order[i]] > 0.0; ++i)
    out.outliers.push_back(order[i]);
  out.radius = i < order.size() ? std::sqrt(min_d2[order[i]]) : 0.0;
  return out;
}

// Greedy disk cover at radius sqrt(r2). Returns chosen centers (in order)
// when at most `outlier_budget` points remain uncovered after k disks.
inline std::optional<std::vector<std::size_t>> disk_cover(const PointSet& pts, const DistanceTable& dist,
                                                          std::uint64_t k, std::uint64_t outlier_budget, double r2) {
  const std::size_t n = pts.size();
  const double wide2 = 9.0 * r2;  // (3r)^2
  std::vector<char> uncovered(n, 1);
  std::vector<char> eligible(n, 1);
  std::size_t remaining = n;

  std::vector<double> count(n, 0.0);
  auto cover = [&](std::size_t center) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!uncovered[j] || dist.d2(center, j) > wide2) continue;
      uncovered[j] = 0;
      --remaining;
      for (std::size_t i = 0; i < n; ++i)
        if (dist.d2(i, j) <= r2) count[i] -= 1.0;
    }
  };

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (dist.d2(i, j) <= r2) count[i] += 1.0;

  for (std::size_t i = 0; i < n; ++i)
    if (pts.is_seed(i)) {
      eligible[i] = 0;
      cover(i);
    }

  std::vector<std::size_t> chosen;
  while (chosen.size() < k && remaining > 0) {
    const std::size_t c = argmax_eligible(count, eligible);
    chosen.push_back(c);
    eligible[c] = 0;
    cover(c);
  }
  if (remaining > outlier_budget) return std::nullopt;
  return chosen;
}

inline CoresetResult to_result(const PointSet& pts, const Assignment& a) {
  CoresetResult r;
  for (auto c : a.centers) r.selected.push_back(pts.id(c));
  r.scores = a.scores;
  r.covering_radius = a.radius;
  for (auto o : a.outliers) r.outliers.push_back(pts.id(o));
  return r;
}

}  // namespace detail

inline CoresetResult kcenter_greedy(const PointSet& points, std::uint64_t k) {
  detail::check_selection_size(points, k);
  std::vector<std::size_t> chosen;
  std::vector<std::optional<double>> scores;
  detail::farthest_first(points, k, chosen, scores);
  return detail::to_result(points, detail::assess(points, std::move(chosen), std::move(scores), 0));
}

// Max over all points of the distance to the nearest listed center.
inline double kcenter_cost(const PointSet& points, const std::vector<std::string>& centers) {
  if (centers.empty()) throw validation_error("kcenter_cost needs at least one center");
  double worst = 0.0;
  std::vector<std::size_t> idx;
  for (const auto& c : centers) idx.push_back(points.index_of(c));
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (auto c : idx) best = std::min(best, points.squared_distance(i, c));
    worst = std::max(worst, best);
  }
  return std::sqrt(worst);
}

inline CoresetResult robust_kcenter(const PointSet& points, std::uint64_t k, std::uint64_t outlier_budget) {
  detail::check_selection_size(points, k);
  if (k + outlier_budget > points.size())
    throw validation_error("k + outlier_budget = " + std::to_string(k + outlier_budget) + " exceeds the " +
                           std::to_string(points.size()) + " points");

  std::vector<std::size_t> greedy;
  std::vector<std::optional<double>> greedy_scores;
  detail::farthest_first(points, k, greedy, greedy_scores);
  detail::Assignment best = detail::assess(points, greedy, greedy_scores, outlier_budget);
  if (best.radius == 0.0) return detail::to_result(points, best);

  // Candidate radii (squared): distances to the greedy centers and seeds,
  // plus every pairwise distance on small instances. Anything above the
  // greedy solution's own radius cannot improve on it.
  const detail::DistanceTable dist(points);
  const double ceiling = best.radius * best.radius;
  std::vector<double> radii{0.0};
  auto consider = [&](double d2) {
    if (d2 <= ceiling) radii.push_back(d2);
  };
  std::vector<std::size_t> anchors = greedy;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (points.is_seed(i)) anchors.push_back(i);
  for (auto a : anchors)
    for (std::size_t i = 0; i < points.size(); ++i) consider(dist.d2(a, i));
  if (dist.dense())
    for (std::size_t i = 0; i < points.size(); ++i)
      for (std::size_t j = i + 1; j < points.size(); ++j) consider(dist.d2(i, j));
  std::sort(radii.begin(), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());

  std::size_t lo = 0;
  std::size_t hi = radii.size();
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    auto cover = detail::disk_cover(points, dist, k, outlier_budget, radii[mid]);
    if (!cover) {
      lo = mid + 1;
      continue;
    }
    std::vector<std::size_t> centers = *cover;
    std::vector<std::optional<double>> scores;
    // Score each disk center by its distance to the centers placed before it.
    {
      std::vector<double> min_d2(points.size(), std::numeric_limits<double>::infinity());
      bool any = false;
      for (std::size_t i = 0; i < points.size(); ++i)
        if (points.is_seed(i)) {
          detail::relax(points, i, min_d2);
          any = true;
        }
      for (auto c : centers) {
        scores.push_back(any ? std::optional<double>(std::sqrt(min_d2[c])) : std::nullopt);
        detail::relax(points, c, min_d2);
        any = true;
      }
    }
    detail::farthest_first(points, k, centers, scores);
    auto candidate = detail::assess(points, std::move(centers), std::move(scores), outlier_budget);
    if (candidate.radius < best.radius) best = std::move(candidate);
    hi = mid;
  }
  return detail::to_result(points, best);
}

}  // namespace alctl
