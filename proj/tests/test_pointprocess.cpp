#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "llc/pointprocess.hpp"

using namespace llc;

namespace {

std::size_t brute_force_cluster_count(const PointCloud& c, double r) {
  UnionFind uf(c.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = i + 1; j < c.size(); ++j)
      if (distance(c[i], c[j], c.metric) < r) uf.merge(i, j);
  std::size_t roots = 0;
  for (std::size_t i = 0; i < c.size(); ++i) roots += uf.find(i) == i;
  return roots;
}

}  // namespace

TEST(Sampling, HomogeneousMeanCount) {
  double s = 0;
  for (int seed = 0; seed < 1000; ++seed) s += sample_homogeneous(100, Window::cube(2), seed).size();
  EXPECT_NEAR(s / 1000, 100, 1.0);
}

TEST(Sampling, TorusVariance) {
  std::vector<double> counts;
  for (int seed = 0; seed < 2000; ++seed) {
    const auto c = sample_homogeneous(50, Window::torus(2), seed);
    for (const auto& p : c.points) {
      ASSERT_GE(p[0], 0.0);
      ASSERT_LT(p[0], 1.0);
    }
    counts.push_back(double(c.size()));
  }
  EXPECT_NEAR(stats::variance(counts), 50, 5);
  EXPECT_TRUE(sample_homogeneous(50, Window::torus(2), 1).metric.is_torus());
}

TEST(Sampling, HalvesUncorrelated) {
  std::vector<double> left, right;
  for (int seed = 0; seed < 2000; ++seed) {
    const auto c = sample_homogeneous(100, Window::cube(2), seed, 9);
    double l = 0;
    for (const auto& p : c.points) l += p[0] < 0.5;
    left.push_back(l);
    right.push_back(double(c.size()) - l);
  }
  EXPECT_LT(std::abs(*stats::pearson(left, right)), 0.05 + 0.02);
}

TEST(Sampling, ReproducibleAndRejectsBadIntensity) {
  const auto a = sample_homogeneous(80, Window::cube(2), 5, 3);
  const auto b = sample_homogeneous(80, Window::cube(2), 5, 3);
  EXPECT_EQ(a.points, b.points);
  EXPECT_THROW(sample_homogeneous(0, Window::cube(2), 1), InvalidInput);
  EXPECT_THROW(sample_homogeneous(-3, Window::cube(2), 1), InvalidInput);
}

TEST(Sampling, ConstantDensityMatchesHomogeneous) {
  std::vector<double> xs, ys;
  for (int seed = 0; seed < 200; ++seed) {
    for (const auto& p : sample_inhomogeneous(50, DensitySpec::constant(Window::cube(2)), seed).points) xs.push_back(p[0]);
    for (const auto& p : sample_homogeneous(50, Window::cube(2), seed + 1000).points) ys.push_back(p[0]);
  }
  auto cdf = [](double t) { return std::clamp(t, 0.0, 1.0); };
  EXPECT_GT(stats::ks_test(xs, cdf).p_value, 0.01);
  EXPECT_GT(stats::ks_test(ys, cdf).p_value, 0.01);
}

TEST(Sampling, GaussianUnitDiskCount) {
  const auto spec = DensitySpec::gaussian(Window::box(2, -4, 4), 1.0);
  const double n = 500;
  const double expected = n * (1 - std::exp(-0.5));
  double total = 0;
  const int reps = 400;
  for (int seed = 0; seed < reps; ++seed) {
    for (const auto& p : sample_inhomogeneous(n, spec, seed).points) total += p[0] * p[0] + p[1] * p[1] < 1;
  }
  EXPECT_NEAR(total / reps, expected, 3 * std::sqrt(expected / reps));
}

TEST(Sampling, ZeroDensityRegionEmpty) {
  std::vector<double> v{1, 0, 0, 1};
  const auto spec = DensitySpec::grid(Window::cube(2), 2, 2, v);
  for (int seed = 0; seed < 50; ++seed) {
    for (const auto& p : sample_inhomogeneous(200, spec, seed).points) {
      const bool left = p[0] < 0.5, low = p[1] < 0.5;
      EXPECT_TRUE((left && low) || (!left && !low));
    }
  }
}

TEST(Sampling, UnderstatedBoundRejected) {
  auto spec = DensitySpec::gaussian(Window::box(2, -4, 4), 1.0);
  spec.kappa_star *= 0.5;
  EXPECT_THROW(sample_inhomogeneous(500, spec, 1), DensitySpecError);
}

TEST(Clusters, Basic) {
  PointCloud three{Metric::euclidean(2), {{0, 0}, {0.1, 0}, {0.05, 0.05}}};
  EXPECT_EQ(clusters(three, 0.2).size(), 1u);
  PointCloud two{Metric::euclidean(2), {{0, 0}, {0.25, 0}}};
  EXPECT_EQ(clusters(two, 0.25).size(), 2u);
  std::mt19937_64 rng(1);
  const auto c = fixtures::uniform_square(100, rng);
  EXPECT_EQ(clusters(c, 1e-9).size(), 100u);
}

TEST(Clusters, MatchesBruteForce) {
  for (int t = 0; t < 100; ++t) {
    const bool torus = t % 2;
    const auto c = sample_homogeneous(200, torus ? Window::torus(2) : Window::cube(2), t);
    const double r = 0.02 + 0.001 * t;
    const auto part = clusters(c, r);
    EXPECT_EQ(part.size(), brute_force_cluster_count(c, r));
    for (std::size_t k = 0; k < part.size(); ++k)
      for (int i : part.members[k]) EXPECT_EQ(part.label[i], int(k));
  }
}

TEST(Clusters, CensusSparseRegime) {
  // Four-point clusters become rarer as n grows at r = n^-0.7.
  double prev = 1e9;
  for (double n : {500.0, 5000.0}) {
    const double r = std::pow(n, -0.7);
    double fours = 0;
    for (int seed = 0; seed < 100; ++seed) fours += cluster_census(sample_homogeneous(n, Window::cube(2), seed), r)[4];
    EXPECT_LT(fours / 100, prev + 1e-12);
    prev = fours / 100;
  }
}

TEST(Mecke, PairCountMatchesIntegral) {
  const double n = 200, r = 0.05;
  const double integral = std::numbers::pi * r * r - 8 * r * r * r / 3 + r * r * r * r / 2;
  const double expected = 0.5 * n * n * integral;
  std::vector<double> counts;
  for (int seed = 0; seed < 1000; ++seed) {
    const auto c = sample_homogeneous(n, Window::cube(2), seed, 77);
    double k = 0;
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t j = i + 1; j < c.size(); ++j) k += distance(c[i], c[j], c.metric) < r;
    counts.push_back(k);
  }
  EXPECT_NEAR(stats::mean(counts), expected, 3 * stats::standard_error(counts));
}

TEST(AssumptionP, ConstantAndGaussian) {
  const std::vector<double> rs{0.001, 0.002, 0.004, 0.008};
  const auto c = assumption_p_check(DensitySpec::constant(Window::cube(2)), 3, rs, 20000, 1);
  EXPECT_TRUE(c.ok());
  EXPECT_NEAR(c.boundary_slope, 1.0, 0.2);
  const auto g = assumption_p_check(DensitySpec::gaussian(Window::box(2, -4, 4)), 3, rs, 20000, 1);
  EXPECT_TRUE(g.ok());
  EXPECT_NEAR(g.modulus_slope, 1.0, 0.2);
}

TEST(Density, IntegralPower) {
  const auto g = DensitySpec::gaussian(Window::box(2, -8, 8), 1.0);
  // Full-plane value: (2 pi)^{-m} * (2 pi / m) for d = 2.
  EXPECT_NEAR(g.integral_power(3), std::pow(2 * std::numbers::pi, -3) * 2 * std::numbers::pi / 3, 1e-10);
  EXPECT_NEAR(DensitySpec::constant(Window::cube(2), 2.0).integral_power(3), 8.0, 1e-14);
}

TEST(Window, Parse) {
  EXPECT_EQ(parse_window("cube").kind, Window::Kind::cube);
  EXPECT_EQ(parse_window("torus").kind, Window::Kind::torus);
  const auto b = parse_window("box:-4,4");
  EXPECT_EQ(b.lo, -4);
  EXPECT_EQ(b.hi, 4);
  EXPECT_THROW(parse_window("sphere"), InvalidInput);
  EXPECT_THROW(parse_density("weird", Window::cube(2)), DensitySpecError);
}

TEST(Clusters, ConnectedSubsetsMatchBruteForce) {
  for (int t = 0; t < 40; ++t) {
    const auto c = sample_homogeneous(14, t % 2 ? Window::torus(2) : Window::cube(2), t, 5);
    const double r = 0.25 + 0.01 * t;
    const int n = static_cast<int>(c.size());
    std::vector<double> brute(6, 0.0);
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
      const int j = std::popcount(mask);
      if (j > 5) continue;
      std::vector<int> idx;
      for (int i = 0; i < n; ++i)
        if (mask >> i & 1) idx.push_back(i);
      UnionFind uf(idx.size());
      for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = a + 1; b < idx.size(); ++b)
          if (distance(c[idx[a]], c[idx[b]], c.metric) < r) uf.merge(a, b);
      std::size_t roots = 0;
      for (std::size_t a = 0; a < idx.size(); ++a) roots += uf.find(a) == a;
      brute[j] += roots == 1;
    }
    const auto fast = connected_subset_counts(c, r, 5);
    for (int j = 1; j <= 5; ++j) EXPECT_EQ(fast[j], brute[j]) << "trial " << t << " j " << j;
  }
}

TEST(Clusters, ConnectedSubsetsPath) {
  // Four collinear points spaced 1: subsets that are runs.
  PointCloud line{Metric::euclidean(2), {{0, 0}, {1, 0}, {2, 0}, {3, 0}}};
  const auto c = connected_subset_counts(line, 1.5, 4);
  EXPECT_EQ(c[1], 4);
  EXPECT_EQ(c[2], 3);
  EXPECT_EQ(c[3], 2);
  EXPECT_EQ(c[4], 1);
}
