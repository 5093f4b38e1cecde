#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "alctl/evaluator.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace alctl;

namespace {

ArrayContainer prob(std::uint32_t h, std::uint32_t w, std::vector<float> v) {
  return ArrayContainer::make_f32(h, w, 1, std::move(v));
}

ArrayContainer instances(std::uint32_t h, std::uint32_t w, std::vector<std::uint32_t> v) {
  return ArrayContainer::make_u32(h, w, 1, std::move(v));
}

BinaryMask mask_from(std::uint32_t h, std::uint32_t w, const std::vector<std::pair<int, int>>& on) {
  BinaryMask m{h, w, std::vector<std::uint8_t>(std::size_t{h} * w, 0)};
  for (auto [r, c] : on) m.data[static_cast<std::size_t>(r) * w + c] = 1;
  return m;
}

// Blob-shaped random gt instances on an otherwise empty map.
ArrayContainer random_gt(std::mt19937_64& rng, std::uint32_t h, std::uint32_t w, int blobs) {
  std::vector<std::uint32_t> v(std::size_t{h} * w, 0);
  for (int b = 0; b < blobs; ++b) {
    const std::uint32_t r0 = rng() % h, c0 = rng() % w, rh = 1 + rng() % 4, rw = 1 + rng() % 4;
    for (std::uint32_t r = r0; r < std::min(h, r0 + rh); ++r)
      for (std::uint32_t c = c0; c < std::min(w, c0 + rw); ++c) v[std::size_t{r} * w + c] = 10 + 3 * b;
  }
  return instances(h, w, std::move(v));
}

std::size_t instance_count(const ArrayContainer& gt) {
  std::set<std::uint32_t> ids;
  for (auto id : gt.u32())
    if (id) ids.insert(id);
  return ids.size();
}

}  // namespace

TEST(Binarize, Examples) {
  const auto m = binarize(prob(1, 3, {0.2f, 0.5f, 0.9f}), 0.5);
  EXPECT_EQ(m.data, (std::vector<std::uint8_t>{0, 1, 1}));
  EXPECT_EQ(binarize(prob(2, 2, {0, 0, 0, 0}), 0.01).positives(), 0u);
  EXPECT_EQ(binarize(prob(1, 1, {0.25f}), 0.25).positives(), 1u);
}

TEST(Binarize, ThresholdMustBeInsideOpenInterval) {
  const auto p = prob(1, 1, {0.5f});
  for (double t : {0.0, 1.0, -0.1, 1.5})
    EXPECT_THROW(binarize(p, t), Error) << t;
}

TEST(DefaultThresholds, NinetyNinePointGrid) {
  const auto t = default_thresholds();
  ASSERT_EQ(t.size(), 99u);
  EXPECT_DOUBLE_EQ(t.front(), 0.01);
  EXPECT_DOUBLE_EQ(t[49], 0.50);
  EXPECT_DOUBLE_EQ(t.back(), 0.99);
}

TEST(ConnectedComponents, Examples) {
  EXPECT_EQ(connected_components(mask_from(4, 4, {})).count, 0u);
  EXPECT_EQ(connected_components(mask_from(2, 2, {{0, 0}, {1, 1}})).count, 1u);
  EXPECT_EQ(connected_components(mask_from(2, 2, {{0, 1}, {1, 0}})).count, 1u);
  const auto l = connected_components(mask_from(5, 5, {{0, 0}, {0, 1}, {4, 4}}));
  EXPECT_EQ(l.count, 2u);
  EXPECT_EQ(l.count, oracle::flood_fill(mask_from(5, 5, {{0, 0}, {0, 1}, {4, 4}}).data, 5, 5).count);
  EXPECT_EQ(l.labels[0], 1u);
  EXPECT_EQ(l.labels[1], 1u);
  EXPECT_EQ(l.labels[24], 2u);
}

TEST(ConnectedComponents, UShapeMergesIntoOneLabel) {
  // Two arms first seen as separate runs, joined on the bottom row.
  const auto l = connected_components(mask_from(3, 3, {{0, 0}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}, {2, 2}}));
  EXPECT_EQ(l.count, 1u);
  for (std::size_t i = 0; i < 9; ++i) {
    if (i != 1 && i != 4) {
      EXPECT_EQ(l.labels[i], 1u);
    }
  }
}

TEST(ConnectedComponents, MatchesFloodFillProperty) {
  std::mt19937_64 rng(201);
  for (int trial = 0; trial < 400; ++trial) {
    const std::uint32_t h = 1 + rng() % 32, w = 1 + rng() % 32;
    const double density = (rng() % 100) / 100.0;
    BinaryMask m{h, w, std::vector<std::uint8_t>(std::size_t{h} * w)};
    for (auto& x : m.data) x = (rng() % 1000) < density * 1000;
    const auto got = connected_components(m);
    const auto want = oracle::flood_fill(m.data, h, w);
    ASSERT_EQ(got.count, want.count);
    ASSERT_EQ(got.labels, want.labels);
  }
}

TEST(MatchDetections, PartialCoverCountsAsDetection) {
  std::vector<std::uint32_t> gt(8 * 8, 0);
  for (int i = 0; i < 20; ++i) gt[i] = 7;
  const auto counts = match_detections(connected_components(mask_from(8, 8, {{0, 3}})), instances(8, 8, gt));
  EXPECT_EQ(counts, (MatchCounts{1, 0, 0}));
}

TEST(MatchDetections, EmptyPredictionMissesEverything) {
  std::vector<std::uint32_t> gt(6 * 6, 0);
  gt[0] = 1;
  gt[14] = 2;
  gt[35] = 9;
  const auto counts = match_detections(connected_components(mask_from(6, 6, {})), instances(6, 6, gt));
  EXPECT_EQ(counts, (MatchCounts{0, 0, 3}));
}

TEST(MatchDetections, OneComponentValidatesTwoInstances) {
  // Instances 1 and 2 sit side by side; one predicted bar spans both, a second
  // blob lies on background.
  std::vector<std::uint32_t> gt(64, 0);
  for (int c = 1; c <= 2; ++c) gt[2 * 8 + c] = 1;
  for (int c = 4; c <= 5; ++c) gt[2 * 8 + c] = 2;
  const auto pred = connected_components(mask_from(8, 8, {{2, 2}, {2, 3}, {2, 4}, {6, 6}, {6, 7}}));
  ASSERT_EQ(pred.count, 2u);
  EXPECT_EQ(match_detections(pred, instances(8, 8, gt)), (MatchCounts{2, 1, 0}));
}

TEST(MatchDetections, InstanceHitTwiceCountsOnce) {
  std::vector<std::uint32_t> gt(16, 0);
  for (int c = 0; c < 4; ++c) gt[c] = 5;
  const auto pred = connected_components(mask_from(4, 4, {{0, 0}, {0, 3}}));
  ASSERT_EQ(pred.count, 2u);
  EXPECT_EQ(match_detections(pred, instances(4, 4, gt)), (MatchCounts{1, 0, 0}));
}

TEST(MatchDetections, DimensionMismatch) {
  EXPECT_THROW(match_detections(connected_components(mask_from(4, 4, {})), instances(4, 5, {})), Error);
}

TEST(MatchDetections, CountsAgreeWithRecountProperty) {
  std::mt19937_64 rng(202);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint32_t h = 1 + rng() % 24, w = 1 + rng() % 24;
    const auto p = testutil::random_map(rng, h, w);
    const auto gt = random_gt(rng, h, w, static_cast<int>(rng() % 5));
    const double t = 0.05 + (rng() % 90) / 100.0;
    const auto got = evaluate_tile(p, gt, t);
    const auto want = oracle::recount({p.f32().begin(), p.f32().end()}, {gt.u32().begin(), gt.u32().end()}, h, w, t);
    ASSERT_EQ(got.tp, want.tp);
    ASSERT_EQ(got.fp, want.fp);
    ASSERT_EQ(got.fn, want.fn);
    ASSERT_EQ(got.tp + got.fn, instance_count(gt));
  }
}

TEST(PrecisionRecallF1, Examples) {
  auto m = precision_recall_f1({0, 0, 0});
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f1, 1.0);
  m = precision_recall_f1({1, 0, 0});
  EXPECT_EQ(m.f1, 1.0);
  m = precision_recall_f1({3, 1, 2});
  EXPECT_DOUBLE_EQ(m.precision, 0.75);
  EXPECT_DOUBLE_EQ(m.recall, 0.6);
  EXPECT_NEAR(m.f1, 2 * 0.75 * 0.6 / 1.35, 1e-15);
  m = precision_recall_f1({0, 4, 2});
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
}

TEST(PrCurve, PerfectPrediction) {
  std::mt19937_64 rng(203);
  std::map<std::string, ArrayContainer> probs, gts;
  for (std::string id : {"a", "b"}) {
    auto gt = random_gt(rng, 16, 16, 3);
    std::vector<float> p(256);
    for (std::size_t i = 0; i < 256; ++i) p[i] = gt.u32()[i] ? 1.0f : 0.0f;
    probs.emplace(id, prob(16, 16, p));
    gts.emplace(id, std::move(gt));
  }
  const auto r = pr_curve(probs, gts);
  ASSERT_EQ(r.curve.size(), 99u);
  for (const auto& pt : r.curve) {
    EXPECT_EQ(pt.precision, 1.0);
    EXPECT_EQ(pt.recall, 1.0);
    EXPECT_EQ(pt.f1, 1.0);
  }
  EXPECT_DOUBLE_EQ(r.operating.threshold, 0.01);
}

TEST(PrCurve, AllZeroPredictionHasZeroRecall) {
  std::vector<std::uint32_t> gt(16, 0);
  gt[5] = 3;
  const std::map<std::string, ArrayContainer> probs{{"t", prob(4, 4, std::vector<float>(16, 0.0f))}};
  const std::map<std::string, ArrayContainer> gts{{"t", instances(4, 4, gt)}};
  for (const auto& pt : pr_curve(probs, gts).curve) {
    EXPECT_EQ(pt.recall, 0.0);
    EXPECT_EQ(pt.f1, 0.0);
  }
}

TEST(PrCurve, TwoTileFixtureMatchesRecount) {
  std::mt19937_64 rng(204);
  std::map<std::string, ArrayContainer> probs, gts;
  probs.emplace("tile_a", testutil::random_map(rng, 20, 17));
  gts.emplace("tile_a", random_gt(rng, 20, 17, 4));
  probs.emplace("tile_b", testutil::random_map(rng, 11, 30));
  gts.emplace("tile_b", random_gt(rng, 11, 30, 2));
  const auto r = pr_curve(probs, gts);
  ASSERT_EQ(r.tiles, (std::vector<std::string>{"tile_a", "tile_b"}));
  for (const auto& pt : r.curve) {
    oracle::Counts total;
    for (const auto& [id, p] : probs) {
      const auto& g = gts.at(id);
      const auto c = oracle::recount({p.f32().begin(), p.f32().end()}, {g.u32().begin(), g.u32().end()}, p.height(),
                                     p.width(), pt.threshold);
      total.tp += c.tp;
      total.fp += c.fp;
      total.fn += c.fn;
    }
    ASSERT_EQ(pt.counts, (MatchCounts{total.tp, total.fp, total.fn})) << pt.threshold;
  }
  double best = 0.0;
  for (const auto& pt : r.curve) best = std::max(best, pt.f1);
  EXPECT_EQ(r.operating.f1, best);
}

TEST(PrCurve, AggregationIsSumOfTilesProperty) {
  std::mt19937_64 rng(205);
  for (int trial = 0; trial < 20; ++trial) {
    std::map<std::string, ArrayContainer> probs, gts;
    const int tiles = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < tiles; ++i) {
      const std::string id = "t" + std::to_string(i);
      probs.emplace(id, testutil::random_map(rng, 12, 12));
      gts.emplace(id, random_gt(rng, 12, 12, 3));
    }
    const std::vector<double> grid{0.1, 0.3, 0.5, 0.7, 0.9};
    const auto whole = pr_curve(probs, gts, grid);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      MatchCounts sum;
      for (const auto& [id, p] : probs) sum += pr_curve({{id, p}}, {{id, gts.at(id)}}, grid).curve[k].counts;
      ASSERT_EQ(whole.curve[k].counts, sum);
    }
  }
}

TEST(PrCurve, DetectionCountsAreMonotoneProperty) {
  std::mt19937_64 rng(206);
  for (int trial = 0; trial < 30; ++trial) {
    const auto p = testutil::random_map(rng, 24, 24);
    const auto gt = random_gt(rng, 24, 24, 4);
    std::size_t prev_pixels = SIZE_MAX;
    std::uint64_t prev_tp = UINT64_MAX;
    for (double t : default_thresholds()) {
      const auto mask = binarize(p, t);
      const auto counts = evaluate_tile(p, gt, t);
      ASSERT_LE(mask.positives(), prev_pixels);
      ASSERT_LE(counts.tp, prev_tp);
      prev_pixels = mask.positives();
      prev_tp = counts.tp;
    }
  }
}

TEST(PrCurve, ComponentCountCanRiseWithThreshold) {
  // A low-valued bridge joins two peaks at t=0.2 and drops out at t=0.5.
  const auto p = prob(1, 3, {0.9f, 0.3f, 0.9f});
  EXPECT_EQ(connected_components(binarize(p, 0.2)).count, 1u);
  EXPECT_EQ(connected_components(binarize(p, 0.5)).count, 2u);
}

TEST(PrCurve, Errors) {
  const std::map<std::string, ArrayContainer> a{{"a", prob(2, 2, {})}};
  const std::map<std::string, ArrayContainer> b{{"b", instances(2, 2, {})}};
  EXPECT_THROW(pr_curve(a, b), Error);
  const std::map<std::string, ArrayContainer> ga{{"a", instances(2, 2, {})}};
  EXPECT_THROW(pr_curve(a, ga, {}), Error);
  EXPECT_THROW(pr_curve(a, ga, {0.5, 1.0}), Error);
}

TEST(PrCurve, ThresholdsAreSortedAndDeduplicated) {
  const std::map<std::string, ArrayContainer> a{{"a", prob(2, 2, {})}};
  const std::map<std::string, ArrayContainer> ga{{"a", instances(2, 2, {})}};
  const auto r = pr_curve(a, ga, {0.7, 0.2, 0.7});
  ASSERT_EQ(r.curve.size(), 2u);
  EXPECT_EQ(r.curve[0].threshold, 0.2);
  EXPECT_EQ(r.curve[1].threshold, 0.7);
}

TEST(OperatingPoint, TieGoesToLowerThreshold) {
  const std::vector<PRPoint> curve{make_point(0.1, {1, 1, 1}), make_point(0.2, {2, 0, 0}), make_point(0.3, {2, 0, 0})};
  EXPECT_EQ(operating_point(curve).threshold, 0.2);
  EXPECT_THROW(operating_point({}), Error);
}

TEST(EvalReport, JsonAndCsvRoundTrip) {
  testutil::TempDir dir;
  std::mt19937_64 rng(207);
  const std::map<std::string, ArrayContainer> probs{{"x", testutil::random_map(rng, 10, 10)}};
  const std::map<std::string, ArrayContainer> gts{{"x", random_gt(rng, 10, 10, 2)}};
  const auto r = pr_curve(probs, gts);
  write_report(r, dir / "r.json");
  const auto back = read_report(dir / "r.json");
  EXPECT_EQ(back.tiles, r.tiles);
  ASSERT_EQ(back.curve.size(), r.curve.size());
  for (std::size_t i = 0; i < r.curve.size(); ++i) {
    EXPECT_EQ(back.curve[i].threshold, r.curve[i].threshold);
    EXPECT_EQ(back.curve[i].f1, r.curve[i].f1);
    EXPECT_EQ(back.curve[i].counts, r.curve[i].counts);
  }
  EXPECT_EQ(back.operating.threshold, r.operating.threshold);

  std::ostringstream csv;
  write_curve_csv({{"model", &r}}, csv);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "report,threshold,precision,recall,f1,tp,fp,fn");
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    EXPECT_EQ(line.rfind("model,", 0), 0u);
    ++rows;
  }
  EXPECT_EQ(rows, 99u);
  testutil::spit(dir / "bad.json", "{\"curve\": 3}");
  EXPECT_THROW(read_report(dir / "bad.json"), Error);
}
