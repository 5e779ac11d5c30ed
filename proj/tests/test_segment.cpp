#include <gtest/gtest.h>

#include <random>

#include "ddist/segment.hpp"
#include "ddist/targets.hpp"
#include "oracles.hpp"

using namespace ddist;

namespace {

std::vector<Point> disk(int cr, int cc, int rad, int w, int h) {
  std::vector<Point> out;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if ((r - cr) * (r - cr) + (c - cc) * (c - cc) <= rad * rad) out.push_back({r, c});
  return out;
}

DetectionResult seeds(const std::vector<Point>& centers) {
  DetectionResult r;
  for (Point p : centers) r.detections.push_back({p, {p}, 1.0});
  return r;
}

int area(const LabelMap& l, int label) {
  int n = 0;
  for (auto v : l.values()) n += v == label;
  return n;
}

}  // namespace

TEST(SegmentConfig, Validation) {
  SegmentConfig c;
  EXPECT_NO_THROW(c.validate());
  c.majority_window = 4;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.outer_threshold = 1.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(IdentifyMarkers, NoDetections) {
  const auto l = identify_markers({}, ScalarMap(8, 8, MapRole::OuterDistance, 1.0));
  EXPECT_EQ(max_label(l), 0);
}

TEST(IdentifyMarkers, DiskCoreSurvives) {
  AnnotationSet a;
  a.width = a.height = 30;
  a.cells.push_back(make_cell(1, disk(15, 15, 10, 30, 30)));
  const auto outer = outer_distance_map(a);
  int core = 0;
  for (double v : oracle::outer_map(a).values()) core += v > 0.5;
  EXPECT_EQ(core, 25);
  SegmentConfig cfg;
  cfg.min_marker_area = core;
  const auto l = identify_markers(seeds({a.cells[0].centroid}), outer, cfg);
  EXPECT_EQ(max_label(l), 1);
  EXPECT_EQ(area(l, 1), core);
  EXPECT_EQ(max_label(identify_markers(seeds({a.cells[0].centroid}), outer)), 0);
}

TEST(IdentifyMarkers, SharedComponentSplitByGeodesicDistance) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> pos(2, 37);
  for (int trial = 0; trial < 20; ++trial) {
    ScalarMap outer(40, 40, MapRole::OuterDistance, 0.0);
    Mask region(40, 40, 0);
    for (int r = 0; r < 40; ++r)
      for (int c = 0; c < 40; ++c)
        if ((r / 6 + c / 6) % 3 != 2 || r < 4) outer(r, c) = 0.9, region(r, c) = 1;
    std::vector<Point> s;
    while (s.size() < 3) {
      Point p{pos(rng), pos(rng)};
      if (region[p] && std::find(s.begin(), s.end(), p) == s.end()) s.push_back(p);
    }
    SegmentConfig cfg;
    cfg.min_marker_area = 0;
    const auto got = identify_markers(seeds(s), outer, cfg);
    std::vector<Grid<int>> d;
    for (Point p : s) d.push_back(oracle::geodesic(region, {p}));
    LabelMap want(40, 40, 0);
    for (int r = 0; r < 40; ++r)
      for (int c = 0; c < 40; ++c) {
        int best = -1;
        for (std::size_t k = 0; k < s.size(); ++k)
          if (d[k](r, c) >= 0 && (best < 0 || d[k](r, c) < d[best](r, c))) best = static_cast<int>(k);
        if (best >= 0) want(r, c) = best + 1;
      }
    ASSERT_EQ(got, compact_labels(want));
  }
}

TEST(IdentifyMarkers, SmallMarkersDroppedAndCompacted) {
  ScalarMap outer(30, 10, MapRole::OuterDistance, 0.0);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 3; ++c) outer(r, c) = 0.9;
  for (int r = 0; r < 10; ++r)
    for (int c = 10; c < 20; ++c) outer(r, c) = 0.9;
  SegmentConfig cfg;
  cfg.min_marker_area = 50;
  const auto l = identify_markers(seeds({{5, 1}, {5, 15}}), outer, cfg);
  EXPECT_EQ(max_label(l), 1);
  EXPECT_EQ(l(5, 15), 1);
  EXPECT_EQ(l(5, 1), 0);
  EXPECT_EQ(area(l, 1), 100);
}

TEST(GrowMarkers, NoForegroundBeyondMarkers) {
  LabelMap m(10, 10, 0);
  ScalarMap cls(10, 10, MapRole::Classification, 0.0), outer(10, 10, MapRole::OuterDistance, 0.0);
  for (int r = 3; r < 6; ++r)
    for (int c = 3; c < 6; ++c) m(r, c) = 1, cls(r, c) = 1.0;
  const auto g = grow_markers(m, cls, outer);
  EXPECT_EQ(g.labels, m);
  EXPECT_EQ(g.iterations, 0);
}

TEST(GrowMarkers, DiskMatchesOracle) {
  AnnotationSet a;
  a.width = a.height = 24;
  a.cells.push_back(make_cell(1, disk(12, 12, 8, 24, 24)));
  TargetConfig tc;
  tc.boundary_dilation_radius = 0;
  ScalarMap cls(24, 24, MapRole::Classification, 0.0);
  for (Point p : a.cells[0].pixels) cls[p] = 1.0;
  const auto outer = outer_distance_map(a, tc);
  LabelMap m(24, 24, 0);
  m(12, 12) = 1;
  const auto g = grow_markers(m, cls, outer);
  EXPECT_EQ(g.labels, oracle::grow(m, cls, outer));
  const int n = static_cast<int>(a.cells[0].pixels.size());
  EXPECT_EQ(area(g.labels, 1), 189);
  EXPECT_EQ(n, 197);
  for (std::size_t i = 0; i < cls.grid.size(); ++i)
    if (g.labels.values()[i]) EXPECT_EQ(cls.grid.values()[i], 1.0);
  EXPECT_LE(g.iterations, n);
}

TEST(GrowMarkers, RandomMatchesOracle) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 15; ++trial) {
    const auto a = oracle::random_annotations(rng, 32, 32, 2, 6);
    const auto cls = oracle::random_map(rng, 32, 32, 3);
    const auto outer = oracle::random_map(rng, 32, 32, 7);
    LabelMap m(32, 32, 0);
    for (const auto& c : a.cells) m[c.centroid] = c.id;
    EXPECT_EQ(grow_markers(m, cls, outer).labels, oracle::grow(m, cls, outer)) << trial;
  }
}

TEST(GrowMarkers, GapStopsGrowth) {
  ScalarMap cls(30, 12, MapRole::Classification, 0.0), outer(30, 12, MapRole::OuterDistance, 0.0);
  const auto left = disk(6, 7, 5, 30, 12), right = disk(6, 20, 5, 30, 12);
  for (Point p : left) cls[p] = 1.0, outer[p] = 0.5;
  for (Point p : right) cls[p] = 1.0, outer[p] = 0.5;
  for (int r = 0; r < 12; ++r) cls(r, 13) = cls(r, 14) = 0.0;
  LabelMap m(30, 12, 0);
  m(6, 7) = 1;
  m(6, 20) = 2;
  const auto g = grow_markers(m, cls, outer);
  for (int r = 0; r < 12; ++r)
    for (int c = 0; c < 30; ++c) {
      if (g.labels(r, c) == 1) EXPECT_LT(c, 13);
      if (g.labels(r, c) == 2) EXPECT_GT(c, 14);
    }
  EXPECT_GT(area(g.labels, 1), 1);
  EXPECT_GT(area(g.labels, 2), 1);
}

TEST(GrowMarkers, HighestMeanGrowsFirstAndIneligibleSkipped) {
  ScalarMap cls(7, 1, MapRole::Classification, 1.0), outer(7, 1, MapRole::OuterDistance, 0.2);
  outer(0, 4) = 0.9;
  LabelMap m(7, 1, 0);
  m(0, 0) = 1;
  m(0, 5) = 2;
  // marker 2 sees (0,4) at 0.9 and (0,6) at 0.2: mean 0.55 beats marker 1's 0.2
  const auto g = grow_markers(m, cls, outer);
  EXPECT_EQ(g.labels(0, 4), 2);
  EXPECT_EQ(g.labels(0, 6), 2);

  ScalarMap cls2(5, 3, MapRole::Classification, 0.0);
  cls2(1, 3) = 1.0;
  LabelMap m2(5, 3, 0);
  m2(1, 2) = 1;
  const auto g2 = grow_markers(m2, cls2, ScalarMap(5, 3, MapRole::OuterDistance, 0.5));
  EXPECT_EQ(g2.labels, m2);
}

TEST(GrowMarkers, InvariantsOnRandomMaps) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    ScalarMap cls(24, 24, MapRole::Classification), outer(24, 24, MapRole::OuterDistance);
    for (auto& v : cls.grid.values()) v = u(rng) < 0.7 ? 1.0 : 0.0;
    for (auto& v : outer.grid.values()) v = u(rng);
    LabelMap m(24, 24, 0);
    for (int k = 1; k <= 4; ++k) m(static_cast<int>(u(rng) * 24), static_cast<int>(u(rng) * 24)) = k;
    m = compact_labels(m);
    const auto g = grow_markers(m, cls, outer);
    int fg = 0;
    for (double v : cls.grid.values()) fg += v > 0.5;
    EXPECT_LE(g.iterations, fg);
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m.values()[i]) EXPECT_EQ(g.labels.values()[i], m.values()[i]);
      if (g.labels.values()[i] && !m.values()[i]) EXPECT_GT(cls.grid.values()[i], 0.5);
    }
  }
}

TEST(MajoritySmooth, UniformAndIsolated) {
  LabelMap u(9, 9, 3);
  EXPECT_EQ(majority_smooth(u, 5), u);
  auto iso = u;
  iso(4, 4) = 1;
  EXPECT_EQ(majority_smooth(iso, 5), u);
  EXPECT_THROW(majority_smooth(u, 4), Error);
}

TEST(MajoritySmooth, MatchesHistogramVoting) {
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<int> l(0, 2);
  for (int trial = 0; trial < 20; ++trial) {
    LabelMap m(20, 20, 0);
    for (auto& v : m.values()) v = l(rng);
    for (int w : {1, 3, 5}) ASSERT_EQ(majority_smooth(m, w), oracle::majority(m, w));
  }
}

TEST(MajoritySmooth, IdempotentOnBlocks) {
  LabelMap m(24, 24, 0);
  for (int r = 0; r < 24; ++r)
    for (int c = 12; c < 24; ++c) m(r, c) = 1;
  const auto once = majority_smooth(m, 5);
  EXPECT_EQ(majority_smooth(once, 5), once);
}

TEST(Segment, AllZeroMaps) {
  ScalarMap z(16, 16);
  const auto r = segment(z, z, z);
  EXPECT_EQ(max_label(r.labels), 0);
}

TEST(Segment, ThreeDisksFromTargets) {
  AnnotationSet a;
  a.width = a.height = 64;
  for (Point c : {Point{14, 14}, Point{14, 48}, Point{46, 30}})
    a.cells.push_back(make_cell(static_cast<int>(a.cells.size()) + 1, disk(c.row, c.col, 9, 64, 64)));
  const auto t = make_targets(a);
  SegmentConfig sc;
  sc.min_marker_area = 10;
  const auto r = segment(t.inner, t.outer, t.classification, {}, sc);
  EXPECT_EQ(max_label(r.labels), 3);
  for (const auto& cell : a.cells) {
    const int lab = r.labels[cell.centroid];
    EXPECT_GT(lab, 0);
    int hits = 0;
    for (const auto& other : a.cells) hits += r.labels[other.centroid] == lab;
    EXPECT_EQ(hits, 1);
  }
  for (std::size_t i = 0; i < r.grown.labels.size(); ++i)
    if (r.grown.labels.values()[i] && !r.markers.values()[i])
      EXPECT_GT(t.classification.grid.values()[i], 0.5);
}
