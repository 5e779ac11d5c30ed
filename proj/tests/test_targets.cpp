#include <gtest/gtest.h>

#include <random>

#include "ddist/targets.hpp"
#include "oracles.hpp"

using namespace ddist;

namespace {

std::vector<Point> disk(int cr, int cc, double r) {
  std::vector<Point> out;
  for (int y = cr - 12; y <= cr + 12; ++y)
    for (int x = cc - 12; x <= cc + 12; ++x)
      if ((y - cr) * (y - cr) + (x - cc) * (x - cc) <= r * r) out.push_back({y, x});
  return out;
}

std::vector<Point> square(int r0, int c0, int n) {
  std::vector<Point> out;
  for (int r = r0; r < r0 + n; ++r)
    for (int c = c0; c < c0 + n; ++c) out.push_back({r, c});
  return out;
}

AnnotationSet single(std::vector<Point> px, int w = 16, int h = 16) {
  AnnotationSet a;
  a.width = w;
  a.height = h;
  a.cells.push_back(make_cell(1, std::move(px)));
  return a;
}

}  // namespace

TEST(DistanceTransform, MatchesBruteForce) {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution b(0.03);
  for (int trial = 0; trial < 10; ++trial) {
    Mask seeds(37, 23, 0);
    for (auto& v : seeds.values()) v = b(rng);
    seeds(5, 5) = 1;
    const auto got = squared_distance_transform(seeds);
    for (int r = 0; r < 23; ++r)
      for (int c = 0; c < 37; ++c) {
        double best = 1e18;
        for (int y = 0; y < 23; ++y)
          for (int x = 0; x < 37; ++x)
            if (seeds(y, x)) best = std::min(best, oracle::sq({r, c}, {y, x}));
        ASSERT_EQ(got(r, c), best);
      }
  }
}

TEST(InnerDistance, CentroidAndBackground) {
  const auto a = single(square(4, 4, 5));
  const auto m = inner_distance_map(a);
  EXPECT_EQ(m(6, 6), 1.0);
  EXPECT_EQ(m(0, 0), 0.0);
  EXPECT_EQ(m.role, MapRole::InnerDistance);
}

TEST(InnerDistance, DistanceThreeValue) {
  const auto a = single(disk(8, 8, 4));
  const auto m = inner_distance_map(a);
  EXPECT_NEAR(m(8, 11), 1.0 / (1.0 + 0.1 * 9.0), 1e-15);
}

TEST(InnerDistance, UsesNearestCentroidOverAllCells) {
  AnnotationSet a;
  a.width = 20;
  a.height = 5;
  auto wide = square(0, 0, 5);
  for (int r = 0; r < 5; ++r)
    for (int c = 5; c < 12; ++c) wide.push_back({r, c});
  a.cells.push_back(make_cell(1, wide));
  a.cells.push_back(make_cell(2, square(0, 13, 5)));
  const auto got = inner_distance_map(a);
  const auto want = oracle::inner_map(a, 0.1);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 20; ++c) EXPECT_DOUBLE_EQ(got(r, c), want(r, c));
}

TEST(InnerDistance, OverlapIsAmbiguous) {
  AnnotationSet a = single(square(0, 0, 4));
  a.cells.push_back(make_cell(2, square(2, 2, 4)));
  EXPECT_THROW(inner_distance_map(a), Error);
  EXPECT_THROW(outer_distance_map(a), Error);
}

TEST(InnerDistance, PowerOneUsesPlainDistance) {
  TargetConfig cfg;
  cfg.distance_power = 1;
  const auto a = single(disk(8, 8, 4));
  const auto m = inner_distance_map(a, cfg);
  EXPECT_NEAR(m(8, 11), 1.0 / (1.0 + 0.1 * 3.0), 1e-15);
}

TEST(OuterDistance, SquareExample) {
  const auto m = outer_distance_map(single(square(0, 0, 5)));
  EXPECT_DOUBLE_EQ(m(1, 2), 0.25);
  EXPECT_DOUBLE_EQ(m(2, 2), 1.0);
  EXPECT_DOUBLE_EQ(m(0, 2), 0.0);
  EXPECT_DOUBLE_EQ(m(10, 10), 0.0);
}

TEST(OuterDistance, AllBoundaryCellIsOne) {
  const auto m = outer_distance_map(single({{3, 3}, {3, 4}}));
  EXPECT_EQ(m(3, 3), 1.0);
  EXPECT_EQ(m(3, 4), 1.0);
}

TEST(OuterDistance, SizeNormalized) {
  for (double r : {5.0, 10.0}) {
    const auto m = outer_distance_map(single(disk(12, 12, r), 26, 26));
    double mx = 0.0;
    for (double v : m.grid.values()) mx = std::max(mx, v);
    EXPECT_EQ(mx, 1.0);
    EXPECT_EQ(m(0, 0), 0.0);
  }
}

TEST(OuterDistance, NoInteriorPitsOnConvexCell) {
  const auto a = single(disk(12, 12, 9), 26, 26);
  const auto m = outer_distance_map(a);
  for (Point q : a.cells[0].pixels) {
    if (m[q] == 1.0) continue;
    bool ok = false;
    for (Point d : oracle::offsets(Connectivity::Four)) {
      Point n{q.row + d.row, q.col + d.col};
      if (m.grid.contains(n) && m[q] <= m[n]) ok = true;
    }
    EXPECT_TRUE(ok);
  }
}

TEST(Classification, EmptyAnnotation) {
  AnnotationSet a;
  a.width = 6;
  a.height = 4;
  const auto m = classification_map(a);
  for (double v : m.grid.values()) EXPECT_EQ(v, 0.0);
}

TEST(Classification, RadiusZeroKeepsInterior) {
  TargetConfig cfg;
  cfg.boundary_dilation_radius = 0;
  const auto m = classification_map(single(square(2, 2, 5)), cfg);
  int ones = 0;
  for (double v : m.grid.values()) ones += v == 1.0;
  EXPECT_EQ(ones, 9);
  EXPECT_EQ(m(4, 4), 1.0);
  EXPECT_EQ(m(2, 4), 0.0);
}

TEST(Classification, AdjacentCellsSeparated) {
  AnnotationSet a;
  a.width = 20;
  a.height = 8;
  std::vector<Point> left, right;
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 10; ++c) left.push_back({r, c});
    for (int c = 10; c < 20; ++c) right.push_back({r, c});
  }
  a.cells.push_back(make_cell(1, left));
  a.cells.push_back(make_cell(2, right));
  const auto m = classification_map(a);
  EXPECT_EQ(max_label(connected_components(m, Connectivity::Eight)), 2);
}

TEST(Targets, BruteForceAndTransformAgree) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = oracle::random_annotations(rng, 48, 40, 2, 6);
    for (int pw : {1, 2}) {
      TargetConfig brute, fast;
      brute.method = DistanceMethod::BruteForce;
      fast.method = DistanceMethod::Transform;
      brute.distance_power = fast.distance_power = pw;
      const auto wi = oracle::inner_map(a, 0.1, pw);
      const auto wo = oracle::outer_map(a, pw);
      for (const auto& cfg : {brute, fast}) {
        const auto i = inner_distance_map(a, cfg);
        const auto o = outer_distance_map(a, cfg);
        for (std::size_t k = 0; k < wi.size(); ++k) {
          ASSERT_NEAR(i.grid.values()[k], wi.values()[k], 1e-12);
          ASSERT_NEAR(o.grid.values()[k], wo.values()[k], 1e-12);
        }
      }
    }
    const auto c = classification_map(a);
    EXPECT_EQ(c.grid, oracle::classification_map(a, 1));
  }
}

TEST(Targets, BundleMatchesComponents) {
  std::mt19937_64 rng(2);
  const auto a = oracle::random_annotations(rng, 32, 32, 3, 3);
  const auto b = make_targets(a);
  EXPECT_EQ(b.inner.grid, inner_distance_map(a).grid);
  EXPECT_EQ(b.outer.grid, outer_distance_map(a).grid);
  EXPECT_EQ(b.classification.grid, classification_map(a).grid);
  for (const auto* m : {&b.inner, &b.outer, &b.classification}) EXPECT_NO_THROW(m->validate());
}

TEST(Targets, CentredDiskArgmaxIsCentroid) {
  const auto a = single(disk(12, 12, 7), 26, 26);
  const auto m = inner_distance_map(a);
  Point best{};
  double bv = -1;
  for (int r = 0; r < 26; ++r)
    for (int c = 0; c < 26; ++c)
      if (m(r, c) > bv) bv = m(r, c), best = {r, c};
  EXPECT_EQ(best, a.cells[0].centroid);
}

TEST(Targets, InvalidConfig) {
  TargetConfig cfg;
  cfg.alpha = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.distance_power = 3;
  EXPECT_THROW(cfg.validate(), Error);
}
