#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "llc/parallel.hpp"
#include "llc/random.hpp"
#include "llc/stats.hpp"

using namespace llc;

TEST(Philox, KnownAnswer) {
  // Philox4x32-10 reference vector: zero counter, zero key.
  Philox g(0, 0);
  EXPECT_EQ(g(), 0x6627e8d5u);
  EXPECT_EQ(g(), 0xe169c58du);
  EXPECT_EQ(g(), 0xbc57ac4cu);
  EXPECT_EQ(g(), 0x9b00dbd8u);
}

TEST(Philox, StreamsDifferAndReplay) {
  Philox a(42, 1), b(42, 2), c(42, 1);
  int same = 0;
  for (int i = 0; i < 100; ++i) {
    const auto x = a(), y = b(), z = c();
    same += x == y;
    EXPECT_EQ(x, z);
  }
  EXPECT_LT(same, 3);
}

TEST(Philox, UniformMoments) {
  Philox g(7, 0);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = g.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
  }
  EXPECT_NEAR(s / n, 0.5, 4 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(s2 / n - (s / n) * (s / n), 1.0 / 12, 2e-3);
}

TEST(Parallel, OrderIndependentOfWorkers) {
  auto f = [](std::size_t i) {
    Philox g(3, i);
    return g.uniform();
  };
  const auto a = parallel_map(500, 1, f);
  const auto b = parallel_map(500, 4, f);
  EXPECT_EQ(a, b);
}

TEST(Parallel, PropagatesExceptions) {
  EXPECT_THROW(parallel_map(10, 3, [](std::size_t i) -> int {
                 if (i == 7) throw std::runtime_error("x");
                 return 0;
               }),
               std::runtime_error);
}

TEST(Stats, OlsExactLine) {
  const auto f = stats::ols({0, 1, 2, 3}, {1, 3, 5, 7});
  EXPECT_NEAR(f.slope, 2, 1e-14);
  EXPECT_NEAR(f.intercept, 1, 1e-14);
  EXPECT_NEAR(f.r2, 1, 1e-14);
}

TEST(Stats, PavaMonotone) {
  const auto y = stats::pava({1, 3, 2, 4, 0, 5});
  for (std::size_t i = 1; i < y.size(); ++i) EXPECT_LE(y[i - 1], y[i]);
  EXPECT_NEAR(y[0], 1, 1e-14);
  EXPECT_NEAR(y[1], 2.25, 1e-14);
  EXPECT_NEAR(y[5], 5, 1e-14);
  double s = 0;
  for (double v : y) s += v;
  EXPECT_NEAR(s, 15, 1e-12);
}

TEST(Stats, PearsonSpearman) {
  EXPECT_NEAR(*stats::pearson({1, 2, 3}, {2, 4, 6}), 1, 1e-14);
  EXPECT_NEAR(*stats::spearman({1, 2, 3, 4}, {1, 8, 27, 64}), 1, 1e-14);
  EXPECT_FALSE(stats::pearson({1, 1, 1}, {1, 2, 3}).has_value());
}

TEST(Stats, ChiSquareAndKolmogorov) {
  EXPECT_NEAR(stats::chi_square_sf(3.841458820694124, 1), 0.05, 1e-9);
  EXPECT_NEAR(stats::kolmogorov_sf(1.3580986393225507), 0.05, 1e-6);
}

TEST(Stats, KsAcceptsUniformRejectsShifted) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> x(2000), y(2000);
  for (auto& v : x) v = u(rng);
  for (auto& v : y) v = std::sqrt(u(rng));
  auto cdf = [](double t) { return std::clamp(t, 0.0, 1.0); };
  EXPECT_GT(stats::ks_test(x, cdf).p_value, 0.01);
  EXPECT_LT(stats::ks_test(y, cdf).p_value, 1e-6);
}

TEST(Stats, PoissonCountTest) {
  std::mt19937_64 rng(2);
  std::poisson_distribution<long> p(1.0);
  std::vector<long> c(3000);
  for (auto& v : c) v = p(rng);
  EXPECT_GT(stats::poisson_count_test(c, 1.0).p_value, 0.01);
  EXPECT_LT(stats::poisson_count_test(c, 1.5).p_value, 1e-6);
}
