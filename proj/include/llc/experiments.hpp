#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "filtration.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "persistence.hpp"
#include "pointprocess.hpp"
#include "random.hpp"
#include "regime.hpp"
#include "stats.hpp"

namespace llc {

// ---------------------------------------------------------------------------
// Reports

struct ExperimentReport {
  std::string name;
  io::json config;
  std::uint64_t seed = 0;
  io::json metrics = io::json::object();
  std::optional<bool> passed;  // set by experiments with a statistical criterion
  double wall_seconds = 0;
  std::vector<std::pair<std::string, std::string>> series;  // file name, CSV text

  io::json to_json() const {
    io::json j{{"experiment", name}, {"config", config}, {"seed", seed}, {"metrics", metrics},
               {"wall_clock_seconds", wall_seconds}, {"version", io::kVersion}, {"git_describe", io::git_describe()}};
    j["passed"] = passed ? io::json(*passed) : io::json(nullptr);
    return j;
  }

  void write(const std::filesystem::path& dir) const {
    io::write_text(dir / "report.json", to_json().dump(2) + "\n");
    for (const auto& [file, text] : series) io::write_text(dir / file, text);
  }
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// 64-bit stream id from two 32-bit parts.
inline std::uint64_t stream_id(std::uint64_t hi, std::uint64_t lo) { return (hi << 32) | (lo & 0xffffffffULL); }

inline double normal(Philox& rng) {
  // Box-Muller; one variate per call keeps the stream position simple.
  const double u1 = 1.0 - rng.uniform(), u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline io::json to_json(const stats::TestResult& t) {
  io::json j{{"statistic", t.statistic}, {"dof", t.dof}, {"n", t.n}};
  j["p_value"] = std::isnan(t.p_value) ? io::json(nullptr) : io::json(t.p_value);
  return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Maximal lifetime search by simulated annealing

/// Default cooling takes the temperature from 0.1 to 1e-5 over the 1e5 steps.
struct AnnealSchedule {
  double t0 = 0.1;
  double cooling = 0.9999079;
  double sigma_factor = 0.5;  // proposal standard deviation = sigma_factor * temperature
  double t_min = 0.0;         // temperature floor
  std::size_t steps = 100000;
  int restarts = 20;

  void validate() const {
    if (!(t0 > 0)) throw InvalidInput("anneal: initial temperature must be positive");
    if (!(cooling > 0 && cooling < 1)) throw InvalidInput("anneal: cooling factor must lie in (0,1)");
    if (!(sigma_factor > 0)) throw InvalidInput("anneal: proposal scale must be positive");
    if (!(t_min >= 0)) throw InvalidInput("anneal: temperature floor must be nonnegative");
    if (steps < 1 || restarts < 1) throw InvalidInput("anneal: budget and restarts must be at least 1");
  }

  io::json to_json() const {
    return {{"t0", t0}, {"cooling", cooling}, {"sigma_factor", sigma_factor}, {"t_min", t_min}, {"steps", steps},
            {"restarts", restarts}};
  }
};

/// Best additive lifetime among negative k-simplices of `pts` once the cloud
/// is rescaled so that simplex dies at time 1, i.e. max (1 - birth/death).
/// -inf when there is no finite (k-2)-dimensional feature.
inline double anneal_objective(const std::vector<Point>& pts, FiltrationKind kind, int k = 3) {
  const PointCloud c(Metric::euclidean(static_cast<int>(pts.front().size())), pts);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& lp : negative_simplices(c, kind, k, kInfinity)) best = std::max(best, 1.0 - lp.birth / lp.death);
  return best;
}

struct AnnealResult {
  int m = 0;
  FiltrationKind kind = FiltrationKind::cech;
  std::vector<Point> configuration;  // scaled so the best simplex dies at time 1
  double lifetime = -std::numeric_limits<double>::infinity();
  std::optional<MaxLifetime> bound;
  std::vector<double> restart_best;
  int best_restart = -1;

  io::json to_json() const {
    io::json j{{"m", m}, {"filtration", to_string(kind)}, {"lifetime", lifetime}, {"restart_best", restart_best},
               {"best_restart", best_restart}, {"configuration", configuration}};
    if (bound) j["bound"] = {{"value", bound->value}, {"provenance", to_string(bound->provenance)}};
    return j;
  }
};

namespace detail {

/// Centre at the centroid and scale to unit maximal norm; the objective is
/// invariant under both.
inline void normalize_configuration(std::vector<Point>& pts) {
  const std::size_t d = pts.front().size();
  Point c(d, 0.0);
  for (const auto& p : pts)
    for (std::size_t i = 0; i < d; ++i) c[i] += p[i] / static_cast<double>(pts.size());
  double r = 0;
  for (auto& p : pts) {
    for (std::size_t i = 0; i < d; ++i) p[i] -= c[i];
    r = std::max(r, std::sqrt(squared_norm(p)));
  }
  if (r > 0)
    for (auto& p : pts)
      for (double& x : p) x /= r;
}

inline std::pair<std::vector<Point>, double> anneal_run(int m, FiltrationKind kind, const AnnealSchedule& s,
                                                        std::uint64_t seed, std::uint64_t restart) {
  Philox rng(seed, restart);
  std::vector<Point> cur(m, Point(2));
  for (auto& p : cur) uniform_in_ball(p, 1.0, rng);
  normalize_configuration(cur);
  double f = anneal_objective(cur, kind);
  std::vector<Point> best = cur;
  double fbest = f;
  double t = s.t0;
  std::vector<Point> prop;
  for (std::size_t step = 0; step < s.steps; ++step) {
    const double sigma = s.sigma_factor * t;
    prop = cur;
    auto& p = prop[static_cast<std::size_t>(rng.uniform() * m) % m];
    for (double& x : p) x += sigma * normal(rng);
    normalize_configuration(prop);
    const double fp = anneal_objective(prop, kind);
    const double u = rng.uniform();
    const bool accept = std::isinf(f) || fp >= f || (!std::isinf(fp) && u < std::exp((fp - f) / t));
    if (accept) {
      cur.swap(prop);
      f = fp;
      if (f > fbest) {
        fbest = f;
        best = cur;
      }
    }
    t = std::max(t * s.cooling, s.t_min);
  }
  return {best, fbest};
}

}  // namespace detail

/// Simulated annealing over m-point planar configurations for the largest
/// additive lifetime with deathtime <= 1. Exceeding a proven bound raises
/// ExperimentError, exceeding a conjectured one raises ConjectureFalsified.
inline AnnealResult anneal_max_lifetime(int m, FiltrationKind kind, const AnnealSchedule& s, std::uint64_t seed,
                                        int workers = 1, int k = 3) {
  if (m < 3 || m > 8) throw InvalidInput("anneal: m must lie in [3, 8]");
  if (k != 3) throw Unsupported("anneal: only k = 3 is supported");
  s.validate();
  AnnealResult res;
  res.m = m;
  res.kind = kind;
  try {
    res.bound = lmax(k, m, kind, LifetimeKind::additive);
  } catch (const Unsupported&) {
  }
  const auto runs = parallel_map(static_cast<std::size_t>(s.restarts), static_cast<unsigned>(workers),
                                 [&](std::size_t r) { return detail::anneal_run(m, kind, s, seed, r); });
  for (std::size_t r = 0; r < runs.size(); ++r) {
    res.restart_best.push_back(runs[r].second);
    if (runs[r].second > res.lifetime) {
      res.lifetime = runs[r].second;
      res.configuration = runs[r].first;
      res.best_restart = static_cast<int>(r);
    }
  }
  if (!std::isinf(res.lifetime)) {
    // Rescale so the best negative simplex dies at time 1.
    const PointCloud c(Metric::euclidean(2), res.configuration);
    double death = 0, top = -1;
    for (const auto& lp : negative_simplices(c, kind, k, kInfinity)) {
      if (1.0 - lp.birth / lp.death > top) {
        top = 1.0 - lp.birth / lp.death;
        death = lp.death;
      }
    }
    for (auto& p : res.configuration)
      for (double& x : p) x /= death;
  }
  if (res.bound && res.lifetime > res.bound->value + 1e-9) {
    const std::string msg = "annealing found lifetime " + io::fmt(res.lifetime) + " above the " +
                            to_string(res.bound->provenance) + " maximum " + io::fmt(res.bound->value) +
                            " for m = " + std::to_string(m) + "; configuration: " + io::json(res.configuration).dump();
    if (res.bound->provenance == Provenance::conjectured) throw ConjectureFalsified(msg);
    throw ExperimentError(msg);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Weibull plots of the largest lifetime

struct WeibullFit {
  std::vector<double> logt;
  std::vector<double> loglogS;
  double q = std::numeric_limits<double>::quiet_NaN();  // slope
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double q_se = std::numeric_limits<double>::quiet_NaN();
  double intercept_se = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();

  /// Weibull scale lambda with S(t) = exp(-(t/lambda)^q).
  double scale() const { return std::exp(-intercept / q); }

  std::string to_csv() const {
    io::CsvWriter w({"logt", "loglogS"});
    for (std::size_t i = 0; i < logt.size(); ++i) w.row({logt[i], loglogS[i]});
    return w.str();
  }

  io::json to_json() const {
    return {{"q", q}, {"q_se", q_se}, {"intercept", intercept}, {"intercept_se", intercept_se}, {"r2", r2},
            {"scale", scale()}, {"points", logt.size()}};
  }
};

namespace detail {

/// Type-7 (linear interpolation) empirical quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& x, double p) {
  const double h = (static_cast<double>(x.size()) - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

}  // namespace detail

/// Regression of log(-log S(t)) on log t over the nine interior deciles of the
/// sample, S the empirical survival function P(X > t). Grid points with
/// S in {0, 1} or t <= 0 are dropped.
inline WeibullFit weibull_fit(std::vector<double> x) {
  if (x.size() < 2) throw ExperimentError("weibull fit: need at least two observations");
  std::sort(x.begin(), x.end());
  if (x.front() == x.back()) throw ExperimentError("weibull fit: all deviations are equal");
  const double n = static_cast<double>(x.size());
  WeibullFit f;
  double prev = -1;
  for (int i = 1; i <= 9; ++i) {
    const double t = detail::quantile_sorted(x, i / 10.0);
    if (!(t > 0) || t == prev) continue;
    prev = t;
    const double above = static_cast<double>(x.end() - std::upper_bound(x.begin(), x.end(), t));
    const double s = above / n;
    if (s <= 0 || s >= 1) continue;
    f.logt.push_back(std::log(t));
    f.loglogS.push_back(std::log(-std::log(s)));
  }
  if (f.logt.size() < 2) throw ExperimentError("weibull fit: fewer than two usable survival points");
  const auto fit = stats::ols(f.logt, f.loglogS);
  f.q = fit.slope;
  f.intercept = fit.intercept;
  f.q_se = fit.slope_se;
  f.intercept_se = fit.intercept_se;
  f.r2 = fit.r2;
  return f;
}

/// Largest scaled additive lifetime among H1 features with deathtime <= r_n.
struct LargestLifetime {
  double l1 = 0;                   // 0 when there is no such feature
  std::size_t features = 0;
  std::size_t oversize_exceedances = 0;  // features above lmax found in clusters larger than m
};

/// Features are read from the Alpha filtration truncated at r_n, which has
/// the same persistence as Cech there. A lifetime above `lm` is only
/// possible in a cluster with more than m points; those are set aside and
/// counted, anything else means the maximum is wrong.
inline LargestLifetime largest_scaled_lifetime(const PointCloud& cloud, double r_n, double lm, int m,
                                               Provenance prov = Provenance::proven) {
  LargestLifetime out;
  if (cloud.size() < 3) return out;
  const FilteredComplex fc = alpha_filtration(cloud, r_n);
  const auto pairing = reduce(fc, {.clearing = true});
  std::optional<ClusterPartition> part;
  for (const auto& pr : pairing.pairs) {
    if (pr.dim != 1) continue;
    const double b = fc[pr.birth].value, r = fc[pr.death].value;
    if (!(r > b) || r > r_n) continue;
    const double life = (r - b) / r_n;
    ++out.features;
    if (life > lm + 1e-9) {
      if (!part) part = clusters(cloud, 2.0 * r_n);
      const std::size_t size = part->members[part->label[fc[pr.death].simplex[0]]].size();
      if (size > static_cast<std::size_t>(m)) {
        ++out.oversize_exceedances;
        continue;
      }
      const std::string msg = "scaled lifetime " + io::fmt(life) + " exceeds the " + to_string(prov) +
                              " maximum " + io::fmt(lm) + " inside a cluster of " + std::to_string(size) + " points";
      if (prov == Provenance::conjectured) throw ConjectureFalsified(msg);
      throw ExperimentError(msg);
    }
    out.l1 = std::max(out.l1, life);
  }
  return out;
}

struct WeibullSlopeConfig {
  int m = 3;
  double beta = 0.74;
  std::vector<double> n_list = {1000};
  std::size_t reps = 5000;
  std::uint64_t seed = 1;
  int workers = 1;

  io::json to_json() const {
    return {{"m", m}, {"beta", beta}, {"n", n_list}, {"reps", reps}, {"workers", workers}};
  }
};

struct WeibullSlopeRow {
  double n = 0;
  double r_n = 0;
  WeibullFit fit;
  double min_deviation = 0;
  std::size_t empty_clouds = 0;  // clouds without a feature dying by r_n
  std::size_t oversize_exceedances = 0;
};

/// Deviations lmax - l(1) for `reps` homogeneous clouds of intensity n on the unit square.
inline std::vector<double> largest_lifetime_deviations(int m, double n, double r_n, std::size_t reps,
                                                       std::uint64_t seed, std::uint64_t stream_hi, int workers,
                                                       std::size_t* empty = nullptr, std::size_t* oversize = nullptr) {
  const MaxLifetime lm = lmax(3, m, FiltrationKind::cech, LifetimeKind::additive);
  const auto res = parallel_map(reps, static_cast<unsigned>(workers), [&](std::size_t i) {
    const PointCloud c = sample_homogeneous(n, Window::cube(2), seed, detail::stream_id(stream_hi, i));
    return largest_scaled_lifetime(c, r_n, lm.value, m, lm.provenance);
  });
  std::vector<double> dev;
  dev.reserve(reps);
  for (const auto& r : res) {
    dev.push_back(lm.value - r.l1);
    if (empty) *empty += r.features == 0;
    if (oversize) *oversize += r.oversize_exceedances;
  }
  return dev;
}

inline std::vector<WeibullSlopeRow> weibull_slope_rows(const WeibullSlopeConfig& cfg) {
  if (cfg.reps < 10) throw InvalidInput("weibull: need at least 10 repetitions");
  std::vector<WeibullSlopeRow> rows;
  for (std::size_t a = 0; a < cfg.n_list.size(); ++a) {
    WeibullSlopeRow row;
    row.n = cfg.n_list[a];
    row.r_n = std::pow(row.n, -cfg.beta);
    const auto dev = largest_lifetime_deviations(cfg.m, row.n, row.r_n, cfg.reps, cfg.seed, 0x1000 + a, cfg.workers,
                                                 &row.empty_clouds, &row.oversize_exceedances);
    row.min_deviation = *std::min_element(dev.begin(), dev.end());
    row.fit = weibull_fit(dev);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ExperimentReport weibull_slope_experiment(const WeibullSlopeConfig& cfg) {
  detail::Stopwatch sw;
  ExperimentReport rep;
  rep.name = "weibull";
  rep.config = cfg.to_json();
  rep.seed = cfg.seed;
  const auto rows = weibull_slope_rows(cfg);
  io::CsvWriter table({"n", "q", "intercept", "r2"});
  rep.metrics["rows"] = io::json::array();
  for (const auto& r : rows) {
    table.row({r.n, r.fit.q, r.fit.intercept, r.fit.r2});
    io::json j = r.fit.to_json();
    j["n"] = r.n;
    j["r_n"] = r.r_n;
    j["min_deviation"] = r.min_deviation;
    j["empty_clouds"] = r.empty_clouds;
    j["oversize_exceedances"] = r.oversize_exceedances;
    rep.metrics["rows"].push_back(j);
    rep.series.emplace_back("weibull_m" + std::to_string(cfg.m) + "_n" + io::fmt(r.n) + ".csv", r.fit.to_csv());
  }
  rep.series.emplace_back("weibull_table.csv", table.str());
  rep.wall_seconds = sw.seconds();
  return rep;
}

// ---------------------------------------------------------------------------
// Correlation of the deathtimes of the two largest cycles

struct DeathcorrConfig {
  std::vector<double> n_list = {200, 500, 1000};
  std::size_t reps = 100;
  std::size_t outer = 30;
  double intensity_factor = 10;  // clouds have intensity intensity_factor * n
  double beta = 0.67;            // r_n = n^-beta
  std::size_t max_attempts = 1000;
  std::uint64_t seed = 1;
  int workers = 1;

  io::json to_json() const {
    return {{"n", n_list},        {"reps", reps}, {"outer", outer}, {"intensity_factor", intensity_factor},
            {"beta", beta},       {"max_attempts", max_attempts}, {"workers", workers}};
  }
};

/// Deathtimes of the largest and second-largest additive lifetimes among
/// features dying by r_max; nullopt when there are fewer than two.
inline std::optional<std::pair<double, double>> top_two_deathtimes(const PointCloud& cloud, double r_max) {
  if (cloud.size() < 3) return std::nullopt;
  const FilteredComplex fc = alpha_filtration(cloud, r_max);
  const auto pairing = reduce(fc, {.clearing = true});
  std::pair<double, double> best{-1, 0}, second{-1, 0};  // (lifetime, death)
  std::size_t count = 0;
  for (const auto& pr : pairing.pairs) {
    if (pr.dim != 1) continue;
    const double b = fc[pr.birth].value, r = fc[pr.death].value;
    if (!(r > b) || r > r_max) continue;
    ++count;
    const std::pair<double, double> cur{r - b, r};
    if (cur > best) {
      second = best;
      best = cur;
    } else if (cur > second) {
      second = cur;
    }
  }
  if (count < 2) return std::nullopt;
  return std::make_pair(best.second, second.second);
}

struct CorrelationSummary {
  double avg_pearson = std::numeric_limits<double>::quiet_NaN();
  double avg_spearman = std::numeric_limits<double>::quiet_NaN();
  double avg_permuted = std::numeric_limits<double>::quiet_NaN();
  std::size_t undefined = 0;  // outer repetitions with a constant deathtime column
  std::vector<double> pearson;

  io::json to_json() const {
    auto num = [](double v) { return std::isnan(v) ? io::json(nullptr) : io::json(v); };
    return {{"avg_corr", num(avg_pearson)}, {"avg_spearman", num(avg_spearman)},
            {"avg_permuted_corr", num(avg_permuted)}, {"undefined", undefined}, {"per_outer", pearson}};
  }
};

/// Averages the per-repetition correlations. The permuted control pairs each
/// first deathtime with a shuffled second deathtime of the same repetition.
inline CorrelationSummary summarize_correlations(const std::vector<std::vector<std::pair<double, double>>>& groups,
                                                 std::uint64_t seed) {
  CorrelationSummary s;
  std::vector<double> sp, perm;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<double> a, b;
    for (const auto& [x, y] : groups[g]) {
      a.push_back(x);
      b.push_back(y);
    }
    const auto p = stats::pearson(a, b);
    if (!p) {
      ++s.undefined;
      continue;
    }
    s.pearson.push_back(*p);
    if (auto r = stats::spearman(a, b)) sp.push_back(*r);
    Philox rng(seed ^ 0x7065726d75746564ULL, g);
    for (std::size_t i = b.size(); i > 1; --i) std::swap(b[i - 1], b[static_cast<std::size_t>(rng.uniform() * i) % i]);
    if (auto r = stats::pearson(a, b)) perm.push_back(*r);
  }
  if (!s.pearson.empty()) s.avg_pearson = stats::mean(s.pearson);
  if (!sp.empty()) s.avg_spearman = stats::mean(sp);
  if (!perm.empty()) s.avg_permuted = stats::mean(perm);
  return s;
}

struct DeathcorrRow {
  double n = 0;
  double r_n = 0;
  CorrelationSummary summary;
  std::size_t resampled = 0;
};

inline std::vector<DeathcorrRow> deathcorr_rows(const DeathcorrConfig& cfg) {
  if (cfg.reps < 3 || cfg.outer < 1) throw InvalidInput("deathcorr: need reps >= 3 and outer >= 1");
  std::vector<DeathcorrRow> rows;
  for (std::size_t a = 0; a < cfg.n_list.size(); ++a) {
    DeathcorrRow row;
    row.n = cfg.n_list[a];
    row.r_n = std::pow(row.n, -cfg.beta);
    const double intensity = cfg.intensity_factor * row.n;
    using Draw = std::pair<std::pair<double, double>, std::size_t>;  // deathtimes, resample count
    const auto draws = parallel_map(cfg.outer * cfg.reps, static_cast<unsigned>(cfg.workers), [&](std::size_t i) -> Draw {
      for (std::size_t attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        const std::uint64_t stream = detail::stream_id(0x2000 + a, i * cfg.max_attempts + attempt);
        const PointCloud c = sample_homogeneous(intensity, Window::cube(2), cfg.seed, stream);
        if (auto d = top_two_deathtimes(c, row.r_n)) return {*d, attempt};
      }
      throw ExperimentError("deathcorr: no cloud with two features after " + std::to_string(cfg.max_attempts) +
                            " attempts at n = " + io::fmt(row.n));
    });
    std::vector<std::vector<std::pair<double, double>>> groups(cfg.outer);
    for (std::size_t i = 0; i < draws.size(); ++i) {
      groups[i / cfg.reps].push_back(draws[i].first);
      row.resampled += draws[i].second;
    }
    row.summary = summarize_correlations(groups, cfg.seed + a);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ExperimentReport deathcorr_experiment(const DeathcorrConfig& cfg) {
  detail::Stopwatch sw;
  ExperimentReport rep;
  rep.name = "deathcorr";
  rep.config = cfg.to_json();
  rep.seed = cfg.seed;
  io::CsvWriter csv({"n", "avg_corr"});
  rep.metrics["rows"] = io::json::array();
  for (const auto& r : deathcorr_rows(cfg)) {
    csv.row({r.n, r.summary.avg_pearson});
    io::json j = r.summary.to_json();
    j["n"] = r.n;
    j["r_n"] = r.r_n;
    j["resampled"] = r.resampled;
    rep.metrics["rows"].push_back(j);
  }
  rep.series.emplace_back("deathcorr.csv", csv.str());
  rep.wall_seconds = sw.seconds();
  return rep;
}

// ---------------------------------------------------------------------------
// Extremal point samples

struct ExtremesSampleOptions {
  std::size_t reps = 1000;
  std::uint64_t seed = 1;
  int workers = 1;
  std::optional<DensitySpec> density;  // homogeneous on the unit cube when empty
};

struct ExtremesSample {
  Window region = Window::cube(2);  // where centres are counted
  std::vector<std::vector<ExtremalPoint>> points;  // per cloud, u <= 1, centres in region
  std::size_t oversize_clusters = 0;
  std::size_t multi_exceedance_clusters = 0;
  std::size_t above_lmax = 0;

  std::vector<long> counts() const {
    std::vector<long> c;
    for (const auto& p : points) c.push_back(static_cast<long>(p.size()));
    return c;
  }
};

/// Threshold exceedances of independent clouds. For the homogeneous case the
/// cloud covers the unit cube enlarged by 2 r_n on every side and only
/// centres inside the cube are kept, so clusters near the edge are complete.
inline ExtremesSample sample_extremes(const RegimeConfig& cfg, double u_n, const ExtremesSampleOptions& opt) {
  cfg.validate();
  ExtremesSample s;
  const Window cloud_window = Window::box(cfg.d, -2 * cfg.r_n, 1 + 2 * cfg.r_n);
  s.region = opt.density ? opt.density->support : Window::cube(cfg.d);
  struct Out {
    std::vector<ExtremalPoint> pts;
    std::size_t oversize = 0, multi = 0, above = 0;
  };
  const auto res = parallel_map(opt.reps, static_cast<unsigned>(opt.workers), [&](std::size_t i) {
    const PointCloud c = opt.density ? sample_inhomogeneous(cfg.n, *opt.density, opt.seed, i)
                                     : sample_homogeneous(cfg.n, cloud_window, opt.seed, i);
    const auto ex = extract_extremes(c, cfg, u_n);
    Out o;
    o.oversize = ex.oversize_clusters;
    o.multi = ex.multi_exceedance_clusters;
    o.above = ex.above_lmax;
    for (const auto& p : ex.restrict_u(1.0)) {
      bool inside = true;
      for (double x : p.center) inside = inside && x >= s.region.lo && x < s.region.hi;
      if (inside) o.pts.push_back(p);
    }
    return o;
  });
  for (const auto& o : res) {
    s.points.push_back(o.pts);
    s.oversize_clusters += o.oversize;
    s.multi_exceedance_clusters += o.multi;
    s.above_lmax += o.above;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Intensity formula

struct IntensityCheck {
  double alpha = 0;
  double u_n = 0;
  double mean = 0;
  double se = 0;
  std::size_t reps = 0;
  bool passed = false;

  io::json to_json() const {
    return {{"alpha", alpha}, {"u_n", u_n},   {"mean", mean}, {"se", se}, {"reps", reps},
            {"ci_lo", mean - 3 * se}, {"ci_hi", mean + 3 * se}, {"passed", passed}};
  }
};

/// Within-cluster exceedance count: every m-subset of the cloud that is
/// connected at distance < 2 r_n contributes the negative k-simplices of its
/// own filtration with deathtime <= r_n and deviation <= u_n whose centre
/// lies in `region`. Larger clusters contribute once per m-subset, so the
/// mean is the threshold integral exactly (Mecke).
inline std::size_t intensity_ustatistic(const PointCloud& cloud, const RegimeConfig& cfg, double u_n,
                                        const Window& region) {
  if (u_n <= 0) return 0;
  const double lm = lmax(cfg.k, cfg.m, cfg.filtration, cfg.lifetime).value;
  std::size_t count = 0;
  std::vector<Point> pts, verts;
  for_each_connected_subset(cloud, 2 * cfg.r_n, cfg.m, [&](const std::vector<int>& ids) {
    if (static_cast<int>(ids.size()) != cfg.m) return;
    pts.clear();
    for (int i : ids) pts.push_back(cloud[i]);
    const PointCloud sub(cloud.metric, pts);
    for (const auto& lp : negative_simplices(sub, cfg.filtration, cfg.k, cfg.r_n)) {
      if (!(lm - lifetime_value(lp.birth, lp.death, cfg.lifetime, cfg.r_n) <= u_n)) continue;
      verts.clear();
      for (int v : lp.death_simplex) verts.push_back(pts[v]);
      const Point z = min_enclosing_ball(verts, cloud.metric).center;
      bool inside = true;
      for (double x : z) inside = inside && x >= region.lo && x < region.hi;
      count += inside;
    }
  });
  return count;
}

/// Mean within-cluster exceedance count with centre in the unit cube for
/// kappa = 1; equals cfg.alpha when u_n solves the threshold equation. The
/// cloud covers the cube enlarged by 2 r_n so no cluster is cut by the edge.
inline IntensityCheck verify_intensity_formula(const RegimeConfig& cfg, double u_n, std::size_t reps, std::uint64_t seed,
                                               int workers = 1) {
  cfg.validate();
  if (reps < 2) throw InvalidInput("intensity check: need at least two repetitions");
  const Window cloud_window = Window::box(cfg.d, -2 * cfg.r_n, 1 + 2 * cfg.r_n);
  const Window region = Window::cube(cfg.d);
  const auto counts = parallel_map(reps, static_cast<unsigned>(workers), [&](std::size_t i) {
    const PointCloud c = sample_homogeneous(cfg.n, cloud_window, seed, detail::stream_id(0x5000, i));
    return static_cast<double>(intensity_ustatistic(c, cfg, u_n, region));
  });
  IntensityCheck r;
  r.alpha = cfg.alpha;
  r.u_n = u_n;
  r.reps = reps;
  r.mean = stats::mean(counts);
  r.se = stats::standard_error(counts);
  r.passed = std::abs(r.mean - cfg.alpha) <= 3 * r.se || (r.se == 0 && r.mean == cfg.alpha);
  return r;
}

// ---------------------------------------------------------------------------
// Poisson-limit diagnostics

struct PoissonnessOptions {
  double alpha = 1;
  int m = 3;
  double q = 3;             // exponent of the mark law u^q
  int cells = 4;            // cells per axis for the spatial test
  double p_threshold = 0.01;
  std::size_t min_points = 200;
};

struct PoissonnessReport {
  double expected_count = 0;
  std::size_t points = 0;
  stats::TestResult count;
  stats::TestResult spatial;
  stats::TestResult marks;
  std::vector<double> coord_mark_corr;
  double independence_p = 1;
  double p_threshold = 0.01;

  bool count_ok() const { return count.p_value > p_threshold; }
  bool spatial_ok() const { return spatial.p_value > p_threshold; }
  bool marks_ok() const { return marks.p_value > p_threshold; }
  bool independence_ok() const { return independence_p > p_threshold; }
  bool passed() const { return count_ok() && spatial_ok() && marks_ok() && independence_ok(); }

  io::json to_json() const {
    return {{"expected_count", expected_count}, {"points", points}, {"count", detail::to_json(count)},
            {"spatial", detail::to_json(spatial)}, {"marks", detail::to_json(marks)},
            {"coord_mark_corr", coord_mark_corr}, {"independence_p", independence_p},
            {"p_threshold", p_threshold}, {"passed", passed()}};
  }
};

/// Tests pooled extremal points against the limiting Poisson process with
/// intensity alpha * kappa(y)^m * q u^(q-1) on region x [0,1]: per-cloud
/// counts against Poisson, cell counts against the kappa^m proportions,
/// u-marks against u^q, and centre coordinates against marks (correlation).
inline PoissonnessReport poissonness_test(const std::vector<std::vector<ExtremalPoint>>& per_cloud,
                                          const DensitySpec& spec, const Window& region, const PoissonnessOptions& opt) {
  PoissonnessReport r;
  r.p_threshold = opt.p_threshold;
  std::vector<const ExtremalPoint*> pooled;
  for (const auto& v : per_cloud)
    for (const auto& p : v) pooled.push_back(&p);
  r.points = pooled.size();
  if (pooled.size() < opt.min_points) {
    throw ResolutionError("poissonness: " + std::to_string(pooled.size()) + " extremal points, need " +
                          std::to_string(opt.min_points));
  }
  const int d = region.dim;
  const std::vector<double> lo(d, region.lo), hi(d, region.hi);
  r.expected_count = opt.alpha * spec.integral_power(opt.m, lo, hi);

  std::vector<long> counts;
  for (const auto& v : per_cloud) counts.push_back(static_cast<long>(v.size()));
  r.count = stats::poisson_count_test(counts, r.expected_count);

  const int k = opt.cells;
  std::size_t ncell = 1;
  for (int i = 0; i < d; ++i) ncell *= static_cast<std::size_t>(k);
  std::vector<double> obs(ncell, 0.0), expv(ncell, 0.0);
  const double w = region.side() / k;
  double total_mass = 0;
  for (std::size_t c = 0; c < ncell; ++c) {
    std::vector<double> a(d), b(d);
    std::size_t rem = c;
    for (int i = 0; i < d; ++i) {
      a[i] = region.lo + w * static_cast<double>(rem % k);
      b[i] = a[i] + w;
      rem /= k;
    }
    expv[c] = spec.integral_power(opt.m, a, b);
    total_mass += expv[c];
  }
  for (const auto* p : pooled) {
    std::size_t c = 0, mul = 1;
    for (int i = 0; i < d; ++i) {
      const int j = std::clamp(static_cast<int>((p->center[i] - region.lo) / w), 0, k - 1);
      c += mul * static_cast<std::size_t>(j);
      mul *= static_cast<std::size_t>(k);
    }
    obs[c] += 1;
  }
  for (double& e : expv) e *= static_cast<double>(pooled.size()) / total_mass;
  r.spatial = stats::chi_square_gof(obs, expv);

  std::vector<double> u;
  for (const auto* p : pooled) u.push_back(p->u);
  const double q = opt.q;
  r.marks = stats::ks_test(u, [q](double t) { return std::pow(std::clamp(t, 0.0, 1.0), q); });

  // Fisher z on each coordinate, Bonferroni over coordinates.
  const double nz = static_cast<double>(pooled.size());
  double pmin = 1;
  for (int i = 0; i < d; ++i) {
    std::vector<double> x;
    for (const auto* p : pooled) x.push_back(p->center[i]);
    const double rho = stats::pearson(x, u).value_or(0.0);
    r.coord_mark_corr.push_back(rho);
    const double z = std::atanh(std::clamp(rho, -0.999999, 0.999999)) * std::sqrt(nz - 3);
    pmin = std::min(pmin, std::erfc(std::abs(z) / std::sqrt(2.0)));
  }
  r.independence_p = std::min(1.0, pmin * d);
  return r;
}

// ---------------------------------------------------------------------------
// Limit law of the largest lifetime

struct LargestLifetimeCheck {
  WeibullFit fit;
  double shape = 0, shape_lo = 0, shape_hi = 0;
  double scale = 0, scale_lo = 0, scale_hi = 0;
  double expected_shape = 0, expected_scale = 0;
  std::size_t reps = 0;

  bool within(double rel) const {
    return std::abs(shape / expected_shape - 1) <= rel && std::abs(scale / expected_scale - 1) <= rel;
  }

  io::json to_json() const {
    return {{"fit", fit.to_json()},  {"shape", shape},         {"shape_ci", {shape_lo, shape_hi}},
            {"scale", scale},        {"scale_ci", {scale_lo, scale_hi}}, {"expected_shape", expected_shape},
            {"expected_scale", expected_scale}, {"reps", reps}};
  }
};

/// Fits (lmax - l(1)) / u_n, over homogeneous clouds on the unit cube, to a
/// Weibull law by the survival regression and compares with shape q and
/// scale (gamma alpha)^(-1/q).
inline LargestLifetimeCheck largest_lifetime_weibull_check(const RegimeConfig& cfg, double u_n, double q,
                                                           std::size_t reps, std::uint64_t seed, int workers = 1,
                                                           double gamma = 1.0) {
  if (cfg.k != 3 || cfg.filtration == FiltrationKind::vr || cfg.lifetime != LifetimeKind::additive || cfg.d != 2) {
    throw Unsupported("largest lifetime check: planar Cech additive k = 3 only");
  }
  if (!(u_n > 0)) throw InvalidInput("largest lifetime check: threshold must be positive");
  auto dev = largest_lifetime_deviations(cfg.m, cfg.n, cfg.r_n, reps, seed, 0x3000, workers);
  for (double& x : dev) x /= u_n;
  LargestLifetimeCheck c;
  c.reps = reps;
  c.fit = weibull_fit(dev);
  c.shape = c.fit.q;
  c.shape_lo = c.fit.q - 1.96 * c.fit.q_se;
  c.shape_hi = c.fit.q + 1.96 * c.fit.q_se;
  c.scale = c.fit.scale();
  // log lambda = -a/q; delta method with the two standard errors, ignoring their covariance.
  const double g_a = -1.0 / c.fit.q, g_q = c.fit.intercept / (c.fit.q * c.fit.q);
  const double sl = std::sqrt(g_a * g_a * c.fit.intercept_se * c.fit.intercept_se + g_q * g_q * c.fit.q_se * c.fit.q_se);
  c.scale_lo = c.scale * std::exp(-1.96 * sl);
  c.scale_hi = c.scale * std::exp(1.96 * sl);
  c.expected_shape = q;
  c.expected_scale = std::pow(gamma * cfg.alpha, -1.0 / q);
  return c;
}

struct ExponentialCheck {
  stats::TestResult ks;
  std::vector<double> statistic;  // n^3 v(l(1)) per cloud
  double l_threshold = 0;         // v^{-1}(1/n^3)
  double bracket_lo = 0, bracket_hi = 0;

  bool in_bracket() const { return l_threshold >= bracket_lo && l_threshold <= bracket_hi; }

  io::json to_json() const {
    return {{"ks", detail::to_json(ks)}, {"l_threshold", l_threshold}, {"bracket", {bracket_lo, bracket_hi}},
            {"in_bracket", in_bracket()}, {"mean_statistic", stats::mean(statistic)}};
  }
};

/// Unbounded regime on the flat torus: n^3 v(l(1)) with l(1) the largest
/// multiplicative lifetime should be Exponential(1). The v-curve must come
/// from clouds independent of the `reps` test clouds (use a different seed).
inline ExponentialCheck unbounded_exponential_check(double n, const ThresholdCurve& v, std::size_t reps,
                                                    std::uint64_t seed, int workers = 1, double eps = 1.0) {
  if (v.increasing) throw InvalidInput("unbounded check expects a v-curve");
  ExponentialCheck c;
  const double n3 = n * n * n;
  const auto l1 = parallel_map(reps, static_cast<unsigned>(workers), [&](std::size_t i) {
    const auto l = torus_mult_lifetimes(n, seed, detail::stream_id(0x4000, i));
    return l.empty() ? 1.0 : *std::max_element(l.begin(), l.end());
  });
  for (double l : l1) c.statistic.push_back(n3 * v.at(l));
  c.ks = stats::ks_test(c.statistic, [](double t) { return t <= 0 ? 0.0 : -std::expm1(-t); });
  c.l_threshold = invert_v(v, 1.0 / n3);
  const double ln = std::log(n), lln = std::log(ln);
  c.bracket_lo = ln / ((18 + eps) * lln);
  c.bracket_hi = 2 * ln / lln;
  return c;
}

// ---------------------------------------------------------------------------
// Threshold helper shared by the experiment drivers

struct ThresholdRun {
  ThresholdCurve curve;
  ThresholdResult result;
};

inline ThresholdRun compute_threshold(const RegimeConfig& cfg, std::size_t mc_samples, std::uint64_t seed,
                                      int workers = 1) {
  GOptions opt;
  opt.samples = mc_samples;
  opt.seed = seed;
  opt.workers = workers;
  ThresholdRun r;
  r.curve = estimate_g(cfg, opt);
  r.result = threshold_u(r.curve, cfg);
  return r;
}

}  // namespace llc
