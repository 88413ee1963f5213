#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "llc/experiments.hpp"

using namespace llc;

namespace {

PointCloud equilateral(double side = 1.0) {
  const double h = std::sqrt(3.0) / 2 * side;
  return PointCloud(Metric::euclidean(2), {{0.4, 0.4}, {0.4 + side, 0.4}, {0.4 + side / 2, 0.4 + h}});
}

// Poisson(lambda) clouds of uniform centres in the unit square with marks ~ u^q.
std::vector<std::vector<ExtremalPoint>> synthetic_poisson(std::size_t clouds, double lambda, double q,
                                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::poisson_distribution<int> count(lambda);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::vector<ExtremalPoint>> out(clouds);
  for (auto& c : out) {
    const int k = count(rng);
    for (int i = 0; i < k; ++i) {
      ExtremalPoint p;
      p.center = {u(rng), u(rng)};
      p.u = std::pow(u(rng), 1.0 / q);
      c.push_back(p);
    }
  }
  return out;
}

}  // namespace

TEST(Anneal, TriangleReachesBound) {
  AnnealSchedule s;
  s.steps = 20000;
  s.restarts = 4;
  s.cooling = std::pow(1e-4, 1.0 / 20000);
  const auto r = anneal_max_lifetime(3, FiltrationKind::cech, s, 7);
  ASSERT_TRUE(r.bound.has_value());
  EXPECT_GE(r.lifetime, 0.13);
  EXPECT_LE(r.lifetime, r.bound->value + 1e-9);
  EXPECT_EQ(r.restart_best.size(), 4u);
  // configuration rescaled so the best simplex dies at 1
  EXPECT_NEAR(anneal_objective(r.configuration, FiltrationKind::cech), r.lifetime, 1e-9);
  const PointCloud c(Metric::euclidean(2), r.configuration);
  double death = 0;
  for (const auto& lp : negative_simplices(c, FiltrationKind::cech, 3, kInfinity)) death = std::max(death, lp.death);
  EXPECT_NEAR(death, 1.0, 1e-9);
}

TEST(Anneal, DeterministicAcrossWorkers) {
  AnnealSchedule s;
  s.steps = 500;
  s.restarts = 3;
  const auto a = anneal_max_lifetime(4, FiltrationKind::cech, s, 11, 1);
  const auto b = anneal_max_lifetime(4, FiltrationKind::cech, s, 11, 3);
  EXPECT_EQ(a.restart_best, b.restart_best);
  EXPECT_EQ(a.best_restart, b.best_restart);
}

TEST(Anneal, RejectsBadInput) {
  AnnealSchedule s;
  EXPECT_THROW(anneal_max_lifetime(2, FiltrationKind::cech, s, 1), InvalidInput);
  EXPECT_THROW(anneal_max_lifetime(9, FiltrationKind::cech, s, 1), InvalidInput);
  s.cooling = 1.0;
  EXPECT_THROW(anneal_max_lifetime(3, FiltrationKind::cech, s, 1), InvalidInput);
  s = AnnealSchedule{};
  s.restarts = 0;
  EXPECT_THROW(anneal_max_lifetime(3, FiltrationKind::cech, s, 1), InvalidInput);
}

TEST(Anneal, ObjectiveOfKnownShapes) {
  // equilateral triangle: 1 - (1/2) / (1/sqrt 3)
  EXPECT_NEAR(anneal_objective(equilateral().points, FiltrationKind::cech), 1 - std::sqrt(3.0) / 2, 1e-12);
  std::vector<Point> line{{0, 0}, {1, 0}, {2, 0}};
  EXPECT_TRUE(std::isinf(anneal_objective(line, FiltrationKind::cech)));
}

TEST(LargestLifetime, ExceedanceRaisesByProvenance) {
  const PointCloud c = equilateral();
  // death 1/sqrt3, birth 1/2
  const double r_n = 0.6, life = (1 / std::sqrt(3.0) - 0.5) / r_n;
  auto ok = largest_scaled_lifetime(c, r_n, 0.134, 3);
  EXPECT_NEAR(ok.l1, life, 1e-9);
  EXPECT_EQ(ok.features, 1u);
  EXPECT_THROW(largest_scaled_lifetime(c, r_n, 0.01, 3, Provenance::conjectured), ConjectureFalsified);
  try {
    largest_scaled_lifetime(c, r_n, 0.01, 3, Provenance::proven);
    FAIL();
  } catch (const ConjectureFalsified&) {
    FAIL() << "proven bound must not raise ConjectureFalsified";
  } catch (const ExperimentError&) {
  }
  // a cluster larger than m is set aside
  auto big = largest_scaled_lifetime(c, r_n, 0.01, 2);
  EXPECT_EQ(big.oversize_exceedances, 1u);
  EXPECT_EQ(big.l1, 0.0);
  // dies after r_n: nothing
  EXPECT_EQ(largest_scaled_lifetime(c, 0.5, 0.134, 3).features, 0u);
}

TEST(WeibullFit, RecoversShapeAndScale) {
  std::mt19937_64 rng(3);
  std::weibull_distribution<double> w(3.0, 2.0);
  std::vector<double> x(20000);
  for (double& v : x) v = w(rng);
  const auto f = weibull_fit(x);
  EXPECT_EQ(f.logt.size(), 9u);
  EXPECT_NEAR(f.q, 3.0, 0.1);
  EXPECT_NEAR(f.scale(), 2.0, 0.05);
  EXPECT_GT(f.r2, 0.99);
  EXPECT_EQ(f.to_csv().substr(0, 14), "logt,loglogS\n-");
}

TEST(WeibullFit, DegenerateInputThrows) {
  EXPECT_THROW(weibull_fit({1.0}), ExperimentError);
  EXPECT_THROW(weibull_fit(std::vector<double>(50, 0.3)), ExperimentError);
  // mostly zeros leave fewer than two usable grid points
  std::vector<double> z(100, 0.0);
  z.back() = 1.0;
  EXPECT_THROW(weibull_fit(z), ExperimentError);
}

TEST(WeibullSlope, DeterministicAcrossWorkers) {
  const double r_n = std::pow(1000.0, -0.74);
  const auto a = largest_lifetime_deviations(3, 1000, r_n, 40, 5, 0x1000, 1);
  const auto b = largest_lifetime_deviations(3, 1000, r_n, 40, 5, 0x1000, 4);
  EXPECT_EQ(a, b);
  for (double d : a) {
    EXPECT_GE(d, -1e-9);
    EXPECT_LE(d, 1 - std::sqrt(3.0) / 2 + 1e-12);
  }
}

TEST(WeibullSlope, ReportLayout) {
  WeibullSlopeConfig cfg;
  cfg.reps = 300;
  cfg.seed = 2;
  const auto rep = weibull_slope_experiment(cfg);
  const auto j = rep.to_json();
  EXPECT_EQ(j["experiment"], "weibull");
  EXPECT_EQ(j["seed"], 2);
  EXPECT_TRUE(j.contains("wall_clock_seconds"));
  EXPECT_TRUE(j.contains("git_describe"));
  EXPECT_TRUE(j["passed"].is_null());
  ASSERT_EQ(j["metrics"]["rows"].size(), 1u);
  ASSERT_EQ(rep.series.size(), 2u);
  EXPECT_EQ(rep.series[0].first, "weibull_m3_n1000.csv");
  EXPECT_EQ(rep.series[1].first, "weibull_table.csv");
  EXPECT_EQ(rep.series[1].second.substr(0, 18), "n,q,intercept,r2\n1");
}

TEST(Deathcorr, FishHasTwoFeatures) {
  const auto c = fixtures::fish();
  auto d = top_two_deathtimes(c, 1.5);
  ASSERT_TRUE(d.has_value());
  EXPECT_NEAR(d->first, 1.0, 1e-12);
  EXPECT_NEAR(d->second, 1.0, 1e-12);
  EXPECT_FALSE(top_two_deathtimes(c, 0.9).has_value());
}

TEST(Deathcorr, SummaryControls) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::vector<std::pair<double, double>>> indep(40), same(5);
  for (auto& g : indep)
    for (int i = 0; i < 100; ++i) g.emplace_back(u(rng), u(rng));
  for (auto& g : same)
    for (int i = 0; i < 50; ++i) {
      const double x = u(rng);
      g.emplace_back(x, x);
    }
  const auto a = summarize_correlations(indep, 1);
  EXPECT_NEAR(a.avg_pearson, 0.0, 0.05);
  EXPECT_NEAR(a.avg_permuted, 0.0, 0.05);
  EXPECT_EQ(a.undefined, 0u);
  const auto b = summarize_correlations(same, 1);
  EXPECT_NEAR(b.avg_pearson, 1.0, 1e-12);
  EXPECT_NEAR(b.avg_spearman, 1.0, 1e-12);
  EXPECT_NEAR(b.avg_permuted, 0.0, 0.2);

  std::vector<std::vector<std::pair<double, double>>> flat{{{1, 2}, {1, 3}, {1, 4}}, {{1, 2}, {2, 3}, {3, 5}}};
  const auto c = summarize_correlations(flat, 1);
  EXPECT_EQ(c.undefined, 1u);
  EXPECT_EQ(c.pearson.size(), 1u);
}

TEST(Deathcorr, ReportLayoutAndDeterminism) {
  DeathcorrConfig cfg;
  cfg.n_list = {200};
  cfg.reps = 6;
  cfg.outer = 2;
  const auto a = deathcorr_experiment(cfg);
  cfg.workers = 3;
  const auto b = deathcorr_experiment(cfg);
  ASSERT_EQ(a.series.size(), 1u);
  EXPECT_EQ(a.series[0].first, "deathcorr.csv");
  EXPECT_EQ(a.series[0].second.substr(0, 11), "n,avg_corr\n");
  EXPECT_EQ(a.series[0].second, b.series[0].second);
  EXPECT_THROW(
      [] {
        DeathcorrConfig bad;
        bad.reps = 2;
        deathcorr_rows(bad);
      }(),
      InvalidInput);
}

TEST(Intensity, UStatisticOnTriangle) {
  auto cfg = RegimeConfig::with_exponent(3, 3, FiltrationKind::cech, LifetimeKind::additive, 1000, 0.7);
  cfg.r_n = 0.6;
  const auto c = equilateral();
  // deviation lmax - life is about 0.0059
  const double dev = (1 - std::sqrt(3.0) / 2) - (1 / std::sqrt(3.0) - 0.5) / 0.6;
  EXPECT_EQ(intensity_ustatistic(c, cfg, 0.0, Window::cube(2)), 0u);
  EXPECT_EQ(intensity_ustatistic(c, cfg, dev * 0.9, Window::cube(2)), 0u);
  EXPECT_EQ(intensity_ustatistic(c, cfg, dev * 1.1, Window::cube(2)), 1u);
  // centre outside the region
  EXPECT_EQ(intensity_ustatistic(c, cfg, 1.0, Window::box(2, 2, 3)), 0u);
  // too far apart to be connected at 2 r_n
  cfg.r_n = 0.45;
  EXPECT_EQ(intensity_ustatistic(c, cfg, 1.0, Window::cube(2)), 0u);
}

TEST(Intensity, DeterministicAcrossWorkers) {
  auto cfg = RegimeConfig::with_exponent(3, 3, FiltrationKind::cech, LifetimeKind::additive, 2000, 0.7);
  const auto a = verify_intensity_formula(cfg, 0.06, 20, 4, 1);
  const auto b = verify_intensity_formula(cfg, 0.06, 20, 4, 3);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.se, b.se);
  EXPECT_THROW(verify_intensity_formula(cfg, 0.06, 1, 4), InvalidInput);
}

TEST(Poissonness, SyntheticPoissonPasses) {
  const auto pts = synthetic_poisson(3000, 1.0, 3.0, 21);
  const auto r = poissonness_test(pts, DensitySpec::constant(Window::cube(2)), Window::cube(2), {});
  EXPECT_NEAR(r.expected_count, 1.0, 1e-12);
  EXPECT_TRUE(r.count_ok()) << r.to_json().dump();
  EXPECT_TRUE(r.spatial_ok()) << r.to_json().dump();
  EXPECT_TRUE(r.marks_ok()) << r.to_json().dump();
  EXPECT_TRUE(r.independence_ok()) << r.to_json().dump();
  EXPECT_TRUE(r.to_json()["passed"].get<bool>());
}

TEST(Poissonness, DetectsWrongLaws) {
  const auto dens = DensitySpec::constant(Window::cube(2));
  // uniform marks instead of u^3
  const auto flat = synthetic_poisson(3000, 1.0, 1.0, 22);
  EXPECT_FALSE(poissonness_test(flat, dens, Window::cube(2), {}).marks_ok());
  // twice the expected count
  const auto dbl = synthetic_poisson(3000, 2.0, 3.0, 23);
  EXPECT_FALSE(poissonness_test(dbl, dens, Window::cube(2), {}).count_ok());
  // everything in the lower-left cell
  auto corner = synthetic_poisson(3000, 1.0, 3.0, 24);
  for (auto& c : corner)
    for (auto& p : c)
      for (double& x : p.center) x *= 0.2;
  EXPECT_FALSE(poissonness_test(corner, dens, Window::cube(2), {}).spatial_ok());
  // marks that grow with the first coordinate
  auto slope = synthetic_poisson(3000, 1.0, 3.0, 25);
  for (auto& c : slope)
    for (auto& p : c) p.u = p.center[0];
  EXPECT_FALSE(poissonness_test(slope, dens, Window::cube(2), {}).independence_ok());
}

TEST(Poissonness, TooFewPointsThrows) {
  const auto pts = synthetic_poisson(50, 1.0, 3.0, 26);
  EXPECT_THROW(poissonness_test(pts, DensitySpec::constant(Window::cube(2)), Window::cube(2), {}), ResolutionError);
}

TEST(Report, WritesJsonAndSeries) {
  ExperimentReport rep;
  rep.name = "x";
  rep.config = {{"a", 1}};
  rep.seed = 5;
  rep.passed = true;
  rep.series.emplace_back("s.csv", "c\n1\n");
  const auto dir = std::filesystem::temp_directory_path() / "llc_report_test";
  std::filesystem::remove_all(dir);
  rep.write(dir);
  const auto j = io::json::parse(io::read_text(dir / "report.json"));
  EXPECT_EQ(j["experiment"], "x");
  EXPECT_EQ(j["passed"], true);
  EXPECT_EQ(j["config"]["a"], 1);
  EXPECT_EQ(io::read_text(dir / "s.csv"), "c\n1\n");
  std::filesystem::remove_all(dir);
}
