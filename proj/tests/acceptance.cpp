// Acceptance run: one PASS/FAIL line per criterion at the pinned tolerances.
//   acceptance [--only 1,4,7] [--smoke] [--seed S] [--workers W]
// Exit status 1 when any selected criterion fails.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "llc/experiments.hpp"

using namespace llc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string f6(double v) {
  char b[64];
  std::snprintf(b, sizeof b, "%.6g", v);
  return b;
}

using Diagram = std::vector<std::pair<double, double>>;

int g_workers = 1;
std::uint64_t g_seed = 1;

// ---------------------------------------------------------------------------
// 1. fish

Outcome fish() {
  const double h = std::sqrt(3.0) / 2;
  const PointCloud c{Metric::euclidean(2), {{-1.5, h}, {-1.5, -h}, {0, 0}, {1, 1}, {1, -1}, {2, 0}}};
  auto recs = [&](FiltrationKind k) {
    const auto fc = build_filtration(c, k, 2, kInfinity);
    auto f = features(reduce(fc), fc, 1);
    std::sort(f.begin(), f.end(), [](const auto& a, const auto& b) { return a.birth > b.birth; });
    return f;
  };
  auto same = [](const FeatureRecord& f, double b, double r, double zx, double zy) {
    return std::abs(f.birth - b) <= 1e-9 && std::abs(f.death - r) <= 1e-9 && std::abs(f.center[0] - zx) <= 1e-9 &&
           std::abs(f.center[1] - zy) <= 1e-9;
  };
  const auto cech = recs(FiltrationKind::cech), vr = recs(FiltrationKind::vr);
  const bool ok = cech.size() == 2 && same(cech[0], h, 1, -1, 0) && same(cech[1], 1 / std::sqrt(2.0), 1, 1, 0) &&
                  vr.size() == 1 && same(vr[0], 1 / std::sqrt(2.0), 1, 1, 0);
  return {ok, "cech H1 records " + std::to_string(cech.size()) + ", vr H1 records " + std::to_string(vr.size())};
}

// ---------------------------------------------------------------------------
// 2. alpha vs brute-force cech

PointCloud uniform_cloud(std::size_t n, Philox& rng, int d = 2) {
  PointCloud c(Metric::euclidean(d), {});
  for (std::size_t i = 0; i < n; ++i) {
    Point p(d);
    for (double& x : p) x = rng.uniform();
    c.points.push_back(p);
  }
  return c;
}

Outcome alpha_cech() {
  double worst = 0;
  std::size_t mismatched = 0;
  for (std::size_t t = 0; t < 500; ++t) {
    Philox rng(g_seed, detail::stream_id(0xA2, t));
    const auto c = uniform_cloud(3 + t % 8, rng);
    const auto a = alpha_filtration(c);
    const auto b = cech_bruteforce(c, 2, kInfinity);
    const auto pa = reduce(a), pb = reduce(b);
    for (int p = 0; p <= 1; ++p) {
      const auto da = diagram(pa, a, p), db = diagram(pb, b, p);
      if (da.size() != db.size()) {
        ++mismatched;
        continue;
      }
      for (std::size_t i = 0; i < da.size(); ++i)
        worst = std::max({worst, std::abs(da[i].first - db[i].first), std::abs(da[i].second - db[i].second)});
    }
  }
  return {mismatched == 0 && worst <= 1e-9,
          "500 clouds, size mismatches " + std::to_string(mismatched) + ", max pair difference " + f6(worst)};
}

// ---------------------------------------------------------------------------
// 3. g against the analytic h

Outcome analytic_g() {
  const auto cfg = RegimeConfig::with_exponent(3, 3, FiltrationKind::cech, LifetimeKind::additive, 1000, 0.7);
  const double lm = lmax(3, 3, FiltrationKind::cech, LifetimeKind::additive).value;
  GOptions opt;
  opt.samples = 10000000;
  opt.seed = g_seed;
  opt.workers = g_workers;
  opt.grid = log_grid(1e-3 * lm, lm, 60);
  const std::vector<double> at{0.01, 0.02, 0.05};
  opt.grid.insert(opt.grid.end(), at.begin(), at.end());
  std::sort(opt.grid.begin(), opt.grid.end());
  opt.grid.erase(std::unique(opt.grid.begin(), opt.grid.end()), opt.grid.end());
  const auto c = estimate_g(cfg, opt);
  bool ok = true;
  std::string d;
  for (double u : at) {
    const auto i = static_cast<std::size_t>(std::find(c.x.begin(), c.x.end(), u) - c.x.begin());
    const double h = analytic_h_cech33(u, 1);
    const double z = (c.value[i] - h) / c.se[i];
    ok = ok && std::abs(z) <= 3;
    d += "g(" + f6(u) + ")=" + f6(c.value[i]) + " vs " + f6(h) + " (z=" + f6(z) + "); ";
  }
  ok = ok && c.fit.ok() && c.fit.q >= 2.7 && c.fit.q <= 3.3;
  return {ok, d + "q=" + f6(c.fit.q)};
}

// ---------------------------------------------------------------------------
// 4. intensity formula

Outcome intensity() {
  auto cfg = RegimeConfig::with_exponent(3, 3, FiltrationKind::cech, LifetimeKind::additive, 2000, 0.7);
  GOptions opt;
  opt.samples = 4000000;
  opt.seed = g_seed;
  opt.workers = g_workers;
  const auto curve = estimate_g(cfg, opt);
  bool ok = true;
  std::string d;
  for (double a : {1.0, 4.0}) {
    cfg.alpha = a;
    const double u = threshold_u(curve, cfg).u;
    const auto r = verify_intensity_formula(cfg, u, 2000, g_seed, g_workers);
    ok = ok && r.passed;
    d += "alpha=" + f6(a) + ": u=" + f6(u) + " mean=" + f6(r.mean) + " se=" + f6(r.se) + "; ";
  }
  return {ok, d};
}

// ---------------------------------------------------------------------------
// 5. cluster bound

Outcome cluster_bound() {
  const double n = 2000, r = std::pow(n, -0.7);
  const std::size_t reps = 2000;
  const auto counts = parallel_map(reps, static_cast<unsigned>(g_workers), [&](std::size_t i) {
    return connected_subset_counts(sample_homogeneous(n, Window::cube(2), g_seed, detail::stream_id(0xC5, i)), r, 5);
  });
  RegimeConfig rc;
  rc.n = n;
  rc.r_n = r;
  bool ok = true;
  std::string d;
  for (int j = 3; j <= 5; ++j) {
    std::vector<double> x;
    for (const auto& c : counts) x.push_back(factorial(j) * c[j]);
    const double mean = stats::mean(x), se = stats::standard_error(x);
    const double bound = std::pow(j, j - 2) * std::pow(std::numbers::pi, j - 1) * rc.rho(j);
    ok = ok && mean - 3 * se <= bound;
    d += "j=" + std::to_string(j) + ": " + f6(mean) + "+-" + f6(se) + " <= " + f6(bound) + "; ";
  }
  return {ok, d};
}

// ---------------------------------------------------------------------------
// 6. annealing

Outcome anneal() {
  const double need[] = {0.133, 0.273, 0.374, 0.418};
  bool ok = true;
  std::string d;
  for (int m = 3; m <= 6; ++m) {
    try {
      const auto r = anneal_max_lifetime(m, FiltrationKind::cech, AnnealSchedule{}, g_seed, g_workers);
      const bool fine = r.lifetime >= need[m - 3] && (!r.bound || r.lifetime <= r.bound->value + 1e-9);
      ok = ok && fine;
      d += "m=" + std::to_string(m) + ": " + f6(r.lifetime) + " (need " + f6(need[m - 3]) + ", max " +
           f6(r.bound ? r.bound->value : std::nan("")) + "); ";
    } catch (const ExperimentError& e) {
      ok = false;
      d += "m=" + std::to_string(m) + ": " + e.what() + "; ";
    }
  }
  return {ok, d};
}

// ---------------------------------------------------------------------------
// 7. weibull slope

Outcome weibull(bool smoke) {
  WeibullSlopeConfig cfg;
  cfg.reps = smoke ? 500 : 5000;
  cfg.seed = g_seed;
  cfg.workers = g_workers;
  const auto row = weibull_slope_rows(cfg).front();
  const double lo = smoke ? 2.0 : 2.5, hi = smoke ? 4.0 : 3.5;
  const bool ok = row.fit.q >= lo && row.fit.q <= hi && (smoke || row.fit.r2 >= 0.95);
  return {ok, std::string(smoke ? "smoke " : "") + "reps=" + std::to_string(cfg.reps) + " q=" + f6(row.fit.q) +
                  " in [" + f6(lo) + ", " + f6(hi) + "], R2=" + f6(row.fit.r2) +
                  ", oversize=" + std::to_string(row.oversize_exceedances)};
}

// ---------------------------------------------------------------------------
// 8. deathtime correlation

Outcome deathcorr() {
  DeathcorrConfig cfg;
  cfg.seed = g_seed;
  cfg.workers = g_workers;
  bool ok = true;
  std::string d;
  for (const auto& r : deathcorr_rows(cfg)) {
    const double v = r.summary.avg_pearson;
    ok = ok && v >= -0.05 && v <= 0.10;
    d += "n=" + f6(r.n) + ": " + f6(v) + " (permuted " + f6(r.summary.avg_permuted) + "); ";
  }
  return {ok, d};
}

// ---------------------------------------------------------------------------
// 9. Poisson-limit diagnostics

Outcome poissonness() {
  const auto cfg = RegimeConfig::with_exponent(3, 3, FiltrationKind::cech, LifetimeKind::additive, 1e5, 0.7);
  const auto th = compute_threshold(cfg, 4000000, g_seed, g_workers);
  const auto s = sample_extremes(cfg, th.result.u, {10000, g_seed, g_workers, std::nullopt});
  const auto r = poissonness_test(s.points, DensitySpec::constant(Window::cube(2)), s.region, {});
  return {r.count_ok() && r.spatial_ok() && r.marks_ok(),
          "u=" + f6(th.result.u) + " points=" + std::to_string(r.points) + " count p=" + f6(r.count.p_value) +
              " spatial p=" + f6(r.spatial.p_value) + " marks D=" + f6(r.marks.statistic) + " p=" +
              f6(r.marks.p_value) + " (independence p=" + f6(r.independence_p) + ")"};
}

// ---------------------------------------------------------------------------
// 10. unbounded regime on the torus

Outcome unbounded() {
  const double n = 500;
  VOptions vo;
  vo.samples = 2000;
  vo.seed = g_seed + 1;
  vo.workers = g_workers;
  const auto v = estimate_v(n, vo);
  bool mono = true;
  for (std::size_t i = 1; i < v.size(); ++i) mono = mono && v.smoothed[i] <= v.smoothed[i - 1] && v.x[i] > v.x[i - 1];
  const auto c = unbounded_exponential_check(n, v, 1000, g_seed + 2, g_workers);
  return {mono && c.in_bracket() && c.ks.p_value > 0.01,
          std::string("v monotone ") + (mono ? "yes" : "no") + ", l_n1=" + f6(c.l_threshold) + " in [" +
              f6(c.bracket_lo) + ", " + f6(c.bracket_hi) + "], KS D=" + f6(c.ks.statistic) +
              " p=" + f6(c.ks.p_value)};
}

// ---------------------------------------------------------------------------
// 11. property suites

FiltrationKind kind_of(std::size_t t) {
  return t % 3 == 0 ? FiltrationKind::cech : t % 3 == 1 ? FiltrationKind::alpha : FiltrationKind::vr;
}

std::size_t size_of(FiltrationKind k, Philox& rng) {
  const std::size_t cap = k == FiltrationKind::cech ? 10 : k == FiltrationKind::vr ? 15 : 30;
  return 3 + static_cast<std::size_t>(rng.uniform() * (cap - 2));
}

bool monotone(const FilteredComplex& fc) {
  std::unordered_map<Simplex, std::size_t, SimplexHash> index;
  for (std::size_t i = 0; i < fc.size(); ++i) index.emplace(fc[i].simplex, i);
  for (std::size_t i = 0; i < fc.size(); ++i) {
    const auto& s = fc[i].simplex;
    if (s.size() < 2) continue;
    for (std::size_t f = 0; f < s.size(); ++f) {
      const auto it = index.find(s.facet(f));
      if (it == index.end() || it->second >= i || fc[it->second].value > fc[i].value) return false;
    }
  }
  return true;
}

std::vector<FeatureRecord> records(const PointCloud& c, FiltrationKind k) {
  const auto fc = build_filtration(c, k, 2, kInfinity);
  auto f = features(reduce(fc), fc, 1);
  std::sort(f.begin(), f.end(), [](const auto& a, const auto& b) { return std::tie(a.death, a.birth) < std::tie(b.death, b.birth); });
  return f;
}

Outcome properties() {
  const std::size_t trials = 1000;
  std::size_t fail_mono = 0, fail_equi = 0, fail_count = 0, fail_stab = 0;
  double worst_stab = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto k = kind_of(t);

    {  // filtration monotonicity
      Philox rng(g_seed, detail::stream_id(0xB1, t));
      const auto c = uniform_cloud(size_of(k, rng), rng);
      fail_mono += !monotone(build_filtration(c, k, 2, kInfinity));
    }

    {  // scale and translation equivariance of feature records
      Philox rng(g_seed, detail::stream_id(0xB2, t));
      const auto c = uniform_cloud(size_of(k, rng), rng);
      const double s = 0.2 + 4.8 * rng.uniform(), tx = 20 * rng.uniform() - 10, ty = 20 * rng.uniform() - 10;
      PointCloud moved = c;
      for (auto& p : moved.points) p = {s * p[0] + tx, s * p[1] + ty};
      const auto a = records(c, k), b = records(moved, k);
      bool ok = a.size() == b.size();
      for (std::size_t i = 0; ok && i < a.size(); ++i) {
        const double tol = 1e-9 * (1 + s + std::abs(tx) + std::abs(ty));
        ok = std::abs(s * a[i].birth - b[i].birth) <= tol && std::abs(s * a[i].death - b[i].death) <= tol &&
             std::abs(s * a[i].center[0] + tx - b[i].center[0]) <= tol &&
             std::abs(s * a[i].center[1] + ty - b[i].center[1]) <= tol;
      }
      fail_equi += !ok;
    }

    {  // pairing-count identities
      Philox rng(g_seed, detail::stream_id(0xB3, t));
      const auto c = uniform_cloud(size_of(k, rng), rng);
      const auto fc = build_filtration(c, k, 2, kInfinity);
      const auto p = reduce(fc), q = reduce(fc, {.clearing = true});
      std::vector<int> hit(fc.size(), 0);
      for (const auto& pr : p.pairs) {
        ++hit[pr.birth];
        ++hit[pr.death];
      }
      for (std::size_t e : p.essential) ++hit[e];
      long euler = 0, euler_essential = 0;
      for (const auto& s : fc.simplices) euler += s.simplex.dim() % 2 ? -1 : 1;
      for (std::size_t e : p.essential) euler_essential += fc[e].simplex.dim() % 2 ? -1 : 1;
      std::size_t h0_essential = 0;
      for (std::size_t e : p.essential) h0_essential += fc[e].simplex.dim() == 0;
      bool same = p.pairs.size() == q.pairs.size() && p.essential == q.essential;
      for (std::size_t i = 0; same && i < p.pairs.size(); ++i)
        same = p.pairs[i].birth == q.pairs[i].birth && p.pairs[i].death == q.pairs[i].death && p.pairs[i].dim == q.pairs[i].dim;
      const bool ok = 2 * p.pairs.size() + p.essential.size() == fc.size() &&
                      std::all_of(hit.begin(), hit.end(), [](int h) { return h == 1; }) && euler == euler_essential &&
                      h0_essential == 1 && same;
      fail_count += !ok;
    }

    {  // stability under 1e-3 perturbations
      Philox rng(g_seed, detail::stream_id(0xB4, t));
      const auto c = uniform_cloud(size_of(k, rng), rng);
      PointCloud moved = c;
      double delta = 0;
      for (auto& p : moved.points) {
        const double dx = 2e-3 * rng.uniform() - 1e-3, dy = 2e-3 * rng.uniform() - 1e-3;
        p[0] += dx;
        p[1] += dy;
        delta = std::max(delta, std::hypot(dx, dy));
      }
      const auto fa = build_filtration(c, k, 2, kInfinity), fb = build_filtration(moved, k, 2, kInfinity);
      const auto pa = reduce(fa), pb = reduce(fb);
      for (int dim = 0; dim <= 1; ++dim) {
        const double bd = bottleneck_distance(diagram(pa, fa, dim), diagram(pb, fb, dim));
        worst_stab = std::max(worst_stab, bd / delta);
        fail_stab += bd > delta + 1e-12;
      }
    }
  }
  const bool ok = fail_mono + fail_equi + fail_count + fail_stab == 0;
  return {ok, std::to_string(trials) + " trials each; failures: monotonicity " + std::to_string(fail_mono) +
                  ", equivariance " + std::to_string(fail_equi) + ", pairing counts " + std::to_string(fail_count) +
                  ", stability " + std::to_string(fail_stab) + " (max bottleneck/displacement " + f6(worst_stab) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  bool smoke = false;
  app.add_option("--only", only, "criteria to run")->delimiter(',')->check(CLI::Range(1, 11));
  app.add_flag("--smoke", smoke, "reduced-repetition variant of criterion 7");
  app.add_option("--seed", g_seed);
  g_workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--workers", g_workers)->check(CLI::Range(1, 1024));
  CLI11_PARSE(app, argc, argv);

  const std::map<int, std::function<Outcome()>> all{
      {1, fish},      {2, alpha_cech},   {3, analytic_g}, {4, intensity},   {5, cluster_bound},
      {6, anneal},    {7, [&] { return weibull(smoke); }},  {8, deathcorr},    {9, poissonness},
      {10, unbounded}, {11, properties}};
  std::set<int> chosen(only.begin(), only.end());
  if (chosen.empty())
    for (const auto& [k, v] : all) chosen.insert(k);

  bool all_pass = true;
  for (int k : chosen) {
    detail::Stopwatch sw;
    Outcome o;
    try {
      o = all.at(k)();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    all_pass = all_pass && o.pass;
    std::cout << "criterion " << k << (k == 7 && smoke ? " (smoke)" : "") << ": " << (o.pass ? "PASS" : "FAIL") << "  "
              << o.detail << " [" << f6(sw.seconds()) << " s]" << std::endl;
  }
  return all_pass ? 0 : 1;
}
