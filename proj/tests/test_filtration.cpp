#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "fixtures.hpp"
#include "llc/filtration.hpp"
#include "llc/persistence.hpp"

using namespace llc;

namespace {

std::map<std::vector<int>, double> as_map(const FilteredComplex& fc) {
  std::map<std::vector<int>, double> m;
  for (const auto& fs : fc.simplices) m[{fs.simplex.begin(), fs.simplex.end()}] = fs.value;
  return m;
}

void expect_monotone(const FilteredComplex& fc) {
  const auto m = as_map(fc);
  for (const auto& fs : fc.simplices) {
    for (std::size_t i = 0; fs.simplex.size() > 1 && i < fs.simplex.size(); ++i) {
      const Simplex f = fs.simplex.facet(i);
      auto it = m.find({f.begin(), f.end()});
      ASSERT_NE(it, m.end());
      EXPECT_LE(it->second, fs.value);
    }
  }
}

}  // namespace

TEST(Cech, FishValues) {
  const auto fc = cech_bruteforce(fixtures::fish(), 2, 1.0 + 1e-9);
  const auto m = as_map(fc);
  const double s = 1 / std::sqrt(2.0), h = std::sqrt(3.0) / 2;
  for (auto e : std::vector<std::vector<int>>{{2, 3}, {2, 4}, {3, 5}, {4, 5}}) EXPECT_NEAR(m.at(e), s, 1e-12);
  for (auto e : std::vector<std::vector<int>>{{0, 1}, {0, 2}, {1, 2}}) EXPECT_NEAR(m.at(e), h, 1e-12);
  for (auto t : std::vector<std::vector<int>>{{0, 1, 2}, {2, 3, 4}, {3, 4, 5}}) EXPECT_NEAR(m.at(t), 1.0, 1e-12);
  EXPECT_TRUE(fc.is_sorted());
  expect_monotone(fc);
}

TEST(Cech, SinglePoint) {
  const auto fc = cech_bruteforce(PointCloud{Metric::euclidean(2), {{0.5, 0.5}}}, 2, 1.0);
  ASSERT_EQ(fc.size(), 1u);
  EXPECT_EQ(fc[0].value, 0.0);
}

TEST(Cech, EquilateralEntersAtCircumradius) {
  const double s = std::sqrt(3.0);
  PointCloud c{Metric::euclidean(2), {{0, 0}, {s, 0}, {s / 2, 1.5}}};
  const auto m = as_map(cech_bruteforce(c, 2, 10));
  EXPECT_NEAR(m.at({0, 1, 2}), 1.0, 1e-12);
}

TEST(Cech, SizeLimit) {
  PointCloud c{Metric::euclidean(2), std::vector<Point>(17, Point{0, 0})};
  EXPECT_THROW(cech_bruteforce(c, 2, 1.0), SizeLimit);
}

TEST(Rips, FishTriangleEarly) {
  const auto m = as_map(vietoris_rips(fixtures::fish(), 2, 1.0 + 1e-9));
  EXPECT_NEAR(m.at({0, 1, 2}), std::sqrt(3.0) / 2, 1e-12);
}

TEST(Rips, TwoPoints) {
  const auto m = as_map(vietoris_rips(PointCloud{Metric::euclidean(2), {{0, 0}, {2, 0}}}, 1, 5));
  EXPECT_NEAR(m.at({0, 1}), 1.0, 1e-15);
}

TEST(Rips, DiamondPersistence) {
  const double s = 1 / std::sqrt(2.0);
  PointCloud c{Metric::euclidean(2), {{0, 0}, {2 * s, 0}, {s, s}, {s, -s}}};
  const auto fc = vietoris_rips(c, 2, 10);
  const auto d = diagram(reduce(fc), fc, 1);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_NEAR(d[0].first, 0.5, 1e-12);
  EXPECT_NEAR(d[0].second, s, 1e-12);
}

TEST(Rips, SizeLimit) {
  PointCloud c{Metric::euclidean(2), {}};
  for (int i = 0; i < 33; ++i) c.points.push_back({double(i), 0});
  EXPECT_THROW(vietoris_rips(c, 2, 1.0), SizeLimit);
  EXPECT_NO_THROW(vietoris_rips(c, 1, 1.0));
}

TEST(Filtrations, InterleavingMonotonicityScaling) {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 200; ++t) {
    const auto c = fixtures::uniform_square(3 + t % 8, rng);
    const auto cech = cech_bruteforce(c, 2, 10);
    const auto vr = vietoris_rips(c, 2, 10);
    expect_monotone(cech);
    expect_monotone(vr);
    const auto mc = as_map(cech), mv = as_map(vr);
    ASSERT_EQ(mc.size(), mv.size());
    for (const auto& [s, v] : mc) {
      // Half-diameter never exceeds the enclosing radius; Jung bounds the gap.
      EXPECT_LE(mv.at(s), v + 1e-12);
      EXPECT_LE(v, mv.at(s) * 2 / std::sqrt(3.0) + 1e-12);
    }
    PointCloud scaled = c;
    for (auto& p : scaled.points)
      for (double& x : p) x *= 2.5;
    const auto ms = as_map(cech_bruteforce(scaled, 2, 25));
    for (const auto& [s, v] : mc) EXPECT_NEAR(ms.at(s), 2.5 * v, 1e-12);
  }
}

TEST(Alpha, MonotoneAndSorted) {
  std::mt19937_64 rng(11);
  const auto c = fixtures::uniform_square(500, rng);
  const auto fc = alpha_filtration(c);
  EXPECT_TRUE(fc.is_sorted());
  expect_monotone(fc);
}

TEST(Alpha, AcuteTrianglePair) {
  PointCloud c{Metric::euclidean(2), {{0, 0}, {1, 0}, {0.4, 0.8}}};
  const auto fc = alpha_filtration(c);
  const auto d = diagram(reduce(fc), fc, 1);
  ASSERT_EQ(d.size(), 1u);
  double longest = 0;
  for (int i = 0; i < 3; ++i) longest = std::max(longest, distance(c[i], c[(i + 1) % 3], c.metric));
  const std::array<Point, 3> p{c[0], c[1], c[2]};
  EXPECT_NEAR(d[0].first, longest / 2, 1e-12);
  EXPECT_NEAR(d[0].second, circumsphere(p)->radius, 1e-12);
}

TEST(Alpha, MatchesCechOnSmallClouds) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 500; ++t) {
    const auto c = fixtures::uniform_square(3 + t % 8, rng);
    const auto a = alpha_filtration(c);
    const auto b = cech_bruteforce(c, 2, 10);
    for (int p = 0; p <= 1; ++p) {
      const auto da = diagram(reduce(a), a, p), db = diagram(reduce(b), b, p);
      ASSERT_EQ(da.size(), db.size());
      for (std::size_t i = 0; i < da.size(); ++i) {
        EXPECT_NEAR(da[i].first, db[i].first, 1e-9);
        EXPECT_NEAR(da[i].second, db[i].second, 1e-9);
      }
    }
  }
}

TEST(Alpha, SubcloudsOfLargerCloud) {
  std::mt19937_64 rng(13);
  const auto big = fixtures::uniform_square(200, rng);
  for (int t = 0; t < 10; ++t) {
    std::vector<Point> pts = big.points;
    std::shuffle(pts.begin(), pts.end(), rng);
    pts.resize(10);
    PointCloud c{Metric::euclidean(2), pts};
    const auto a = alpha_filtration(c);
    const auto b = cech_bruteforce(c, 2, 10);
    EXPECT_EQ(diagram(reduce(a), a, 1).size(), diagram(reduce(b), b, 1).size());
  }
}

TEST(Alpha, TruncationDropsLargeSimplices) {
  std::mt19937_64 rng(14);
  const auto c = fixtures::uniform_square(300, rng);
  const auto fc = alpha_filtration(c, 0.03);
  for (const auto& fs : fc.simplices) EXPECT_LE(fs.value, 0.03);
  expect_monotone(fc);
}

TEST(Serialization, TwoPointGolden) {
  PointCloud c{Metric::euclidean(2), {{0, 0}, {2, 0}}};
  EXPECT_EQ(complex_to_string(vietoris_rips(c, 1, 5)), "0:0\n1:0\n0,1:1\n");
}

TEST(Alpha, NearRightTrianglesStayFiltrations) {
  // Third vertex on the circle with diameter ab: the edge ab is Gabriel up to
  // rounding and its half-length can exceed the computed circumradius.
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0, 1);
  int rounding_cases = 0;
  for (int t = 0; t < 5000; ++t) {
    const double cx = 10 * u(rng), cy = 10 * u(rng), r = 0.001 + u(rng), phi = 6.283185307179586 * u(rng);
    const double th = phi + 0.2 + 2.7 * u(rng);
    PointCloud c{Metric::euclidean(2),
                 {{cx + r * std::cos(phi), cy + r * std::sin(phi)},
                  {cx - r * std::cos(phi), cy - r * std::sin(phi)},
                  {cx + r * std::cos(th), cy + r * std::sin(th)}}};
    const double half = 0.5 * std::sqrt(detail::squared_distance(c[0], c[1]));
    const double dot = (c[0][0] - c[2][0]) * (c[1][0] - c[2][0]) + (c[0][1] - c[2][1]) * (c[1][1] - c[2][1]);
    if (dot >= 0 && detail::circumradius2d(c[0], c[1], c[2]) < half) ++rounding_cases;
    const auto fc = alpha_filtration(c);
    ASSERT_NO_THROW(reduce(fc)) << t;
    double tri = 0;
    for (const auto& s : fc.simplices) if (s.simplex.size() == 3) tri = s.value;
    ASSERT_NO_THROW(reduce(alpha_filtration(c, tri))) << t;
  }
  EXPECT_GT(rounding_cases, 0);
}
