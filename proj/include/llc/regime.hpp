#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "errors.hpp"
#include "filtration.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "persistence.hpp"
#include "pointprocess.hpp"
#include "random.hpp"
#include "stats.hpp"
#include "union_find.hpp"

namespace llc {

enum class LifetimeKind { additive, multiplicative };

inline std::string to_string(LifetimeKind k) { return k == LifetimeKind::additive ? "add" : "mult"; }

inline LifetimeKind parse_lifetime(const std::string& s) {
  if (s == "add" || s == "additive") return LifetimeKind::additive;
  if (s == "mult" || s == "multiplicative") return LifetimeKind::multiplicative;
  throw InvalidInput("unknown lifetime kind: " + s);
}

inline FiltrationKind parse_filtration(const std::string& s) {
  if (s == "cech") return FiltrationKind::cech;
  if (s == "alpha") return FiltrationKind::alpha;
  if (s == "vr" || s == "rips") return FiltrationKind::vr;
  throw InvalidInput("unknown filtration: " + s);
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline double factorial(int n) {
  double r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

inline double ball_volume(int d, double radius) {
  return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0) * std::pow(radius, d);
}

/// Open interval of deathtime exponents beta (r_n = n^-beta) for which the
/// m-sparse regime holds: n(n r^d)^(m-1) -> inf and n(n r^d)^m -> 0.
inline std::pair<double, double> admissible_beta(int d, int m) {
  return {(m + 1.0) / (d * m), m > 1 ? m / (d * (m - 1.0)) : std::numeric_limits<double>::infinity()};
}

struct RegimeConfig {
  int d = 2;
  int k = 3;
  int m = 3;
  FiltrationKind filtration = FiltrationKind::cech;
  LifetimeKind lifetime = LifetimeKind::additive;
  double n = 1000;
  double r_n = 0.01;
  double alpha = 1;
  std::optional<double> beta;  // set when r_n = n^-beta

  static RegimeConfig with_exponent(int k, int m, FiltrationKind f, LifetimeKind lt, double n, double beta,
                                    double alpha = 1.0, int d = 2) {
    RegimeConfig c;
    c.d = d;
    c.k = k;
    c.m = m;
    c.filtration = f;
    c.lifetime = lt;
    c.n = n;
    c.beta = beta;
    c.r_n = std::pow(n, -beta);
    c.alpha = alpha;
    return c;
  }

  /// rho_{n,j} = n (n r_n^d)^(j-1).
  double rho(int j) const { return n * std::pow(n * std::pow(r_n, d), j - 1); }

  /// C(m,k)/m!, the labelling factor in the intensity formula.
  double labelling_factor() const { return binomial(m, k) / factorial(m); }

  /// Value of g that the threshold u_{n,alpha} must reach.
  double target() const { return alpha / (rho(m) * labelling_factor()); }

  void validate() const {
    if (d < 1) throw InvalidInput("dimension must be positive");
    if (k < 2 || k > m) throw InvalidInput("need 2 <= k <= m");
    if (k - 1 > d + 1 && filtration != FiltrationKind::vr) throw InvalidInput("simplex size exceeds d+2");
    if (!(n > 0) || !(r_n > 0)) throw InvalidInput("n and r_n must be positive");
    if (!(alpha >= 0)) throw InvalidInput("alpha must be nonnegative");
  }

  std::vector<std::string> warnings() const {
    std::vector<std::string> w;
    if (rho(m) < 10) w.push_back("rho_{n,m} = " + io::fmt(rho(m)) + " is below 10: too few m-clusters");
    if (rho(m + 1) > 0.5) w.push_back("rho_{n,m+1} = " + io::fmt(rho(m + 1)) + " exceeds 0.5: (m+1)-clusters common");
    if (beta) {
      const auto [lo, hi] = admissible_beta(d, m);
      if (!(*beta > lo && *beta < hi)) {
        w.push_back("beta = " + io::fmt(*beta) + " outside the admissible interval (" + io::fmt(lo) + ", " +
                    io::fmt(hi) + ")");
      }
    }
    return w;
  }

  io::json to_json() const {
    io::json j{{"d", d},
               {"k", k},
               {"m", m},
               {"filtration", to_string(filtration)},
               {"lifetime", to_string(lifetime)},
               {"n", n},
               {"r_n", r_n},
               {"alpha", alpha},
               {"rho_m", rho(m)},
               {"rho_m_plus_1", rho(m + 1)}};
    if (beta) j["beta"] = *beta;
    return j;
  }
};

// ---------------------------------------------------------------------------
// Maximal lifetimes

enum class Provenance { proven, conjectured };

inline std::string to_string(Provenance p) { return p == Provenance::proven ? "proven" : "conjectured"; }

struct MaxLifetime {
  double value = 0;
  Provenance provenance = Provenance::proven;
};

/// Additive lifetime of m points equally spaced on the unit circle.
inline double regular_polygon_lifetime(int m) {
  if (m < 3) throw InvalidInput("regular polygon needs m >= 3");
  return 1.0 - std::sin(std::numbers::pi / m);
}

/// Largest lifetime of a (k-2)-cycle over m-point planar clouds with deathtime <= 1.
inline MaxLifetime lmax(int k, int m, FiltrationKind kind, LifetimeKind lt) {
  const bool cech = kind != FiltrationKind::vr;
  if (k != 3) throw Unsupported("maximal lifetime only known for k = 3");
  if (lt == LifetimeKind::multiplicative) {
    if (cech && m == 3) return {2.0 / std::sqrt(3.0), Provenance::proven};
    throw Unsupported("multiplicative maximal lifetime only known for Cech, m = 3");
  }
  if (cech) {
    if (m == 3) return {1.0 - std::sqrt(3.0) / 2.0, Provenance::proven};
    if (m >= 4 && m <= 8) return {regular_polygon_lifetime(m), Provenance::conjectured};
    throw Unsupported("Cech maximal lifetime needs 3 <= m <= 8");
  }
  if (m == 4) return {1.0 - 1.0 / std::sqrt(2.0), Provenance::proven};
  throw Unsupported("VR maximal lifetime only known for m = 4");
}

inline double lifetime_value(double birth, double death, LifetimeKind lt, double scale = 1.0) {
  return lt == LifetimeKind::additive ? (death - birth) / scale
                                      : (birth > 0 ? death / birth : std::numeric_limits<double>::infinity());
}

// ---------------------------------------------------------------------------
// Persistence of a small cloud

struct LocalPair {
  double birth = 0;
  double death = 0;
  Simplex death_simplex;
};

/// Negative k-simplices (with positive lifetime and deathtime <= r_max) of a
/// small cloud under the Cech (brute force) or VR filtration. Alpha requests
/// use Cech, which has the same persistence.
inline std::vector<LocalPair> negative_simplices(const PointCloud& c, FiltrationKind kind, int k, double r_max) {
  const int top = k - 1;
  const FilteredComplex fc = kind == FiltrationKind::vr ? vietoris_rips(c, top, r_max) : cech_bruteforce(c, top, r_max);
  const auto pairing = reduce(fc);
  std::vector<LocalPair> out;
  for (const auto& pr : pairing.pairs) {
    if (pr.dim != k - 2) continue;
    const double b = fc[pr.birth].value, r = fc[pr.death].value;
    if (r > b && r <= r_max) out.push_back({b, r, fc[pr.death].simplex});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Threshold curves

/// log f = q log x + log c, fitted on the smallest resolvable decade.
struct PowerLaw {
  double q = std::numeric_limits<double>::quiet_NaN();
  double log_c = std::numeric_limits<double>::quiet_NaN();
  double q_se = 0;
  double log_c_se = 0;
  double x_lo = 0, x_hi = 0;
  std::size_t points = 0;

  bool ok() const { return std::isfinite(q) && points >= 3; }
  double operator()(double x) const { return std::exp(log_c + q * std::log(x)); }
  double inverse(double y) const { return std::exp((std::log(y) - log_c) / q); }
};

struct ThresholdCurve {
  std::string arg_name = "u";
  std::string value_name = "g";
  bool increasing = true;
  std::vector<double> x;
  std::vector<double> value;
  std::vector<double> se;
  std::vector<double> smoothed;
  std::vector<std::size_t> hits;
  PowerLaw fit;
  std::size_t samples = 0;
  std::vector<std::string> warnings;

  std::size_t size() const { return x.size(); }

  std::string to_csv() const {
    io::CsvWriter w({arg_name, value_name, "se", "smoothed"});
    for (std::size_t i = 0; i < x.size(); ++i) w.row({x[i], value[i], se[i], smoothed[i]});
    return w.str();
  }

  /// Piecewise-linear interpolation of the smoothed curve (clamped at the ends).
  double at(double t) const { return interpolate(smoothed, t); }

  double interpolate(const std::vector<double>& y, double t) const {
    if (x.empty()) throw InvalidInput("empty curve");
    if (t <= x.front()) return y.front();
    if (t >= x.back()) return y.back();
    const auto it = std::upper_bound(x.begin(), x.end(), t);
    const std::size_t i = static_cast<std::size_t>(it - x.begin());
    const double w = (t - x[i - 1]) / (x[i] - x[i - 1]);
    return y[i - 1] + w * (y[i] - y[i - 1]);
  }

  io::json to_json() const {
    io::json j{{"samples", samples}, {"points", x.size()}, {"warnings", warnings}};
    if (fit.ok()) {
      j["fit"] = {{"q", fit.q}, {"q_se", fit.q_se}, {"log_c", fit.log_c}, {"log_c_se", fit.log_c_se},
                  {"x_lo", fit.x_lo}, {"x_hi", fit.x_hi}, {"points", fit.points}};
    }
    return j;
  }
};

namespace detail {

inline constexpr std::size_t kMinResolvableHits = 20;

/// PAVA smoothing in the curve's direction; weights from standard errors.
inline std::vector<double> monotone_smooth(const std::vector<double>& y, const std::vector<double>& se, bool increasing) {
  std::vector<double> w(y.size());
  double floor = std::numeric_limits<double>::infinity();
  for (double s : se) {
    if (s > 0) floor = std::min(floor, s);
  }
  if (!std::isfinite(floor)) floor = 1.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double s = std::max(se[i], 0.1 * floor);
    w[i] = 1.0 / (s * s);
  }
  if (increasing) return stats::pava(y, w);
  std::vector<double> ry(y.rbegin(), y.rend()), rw(w.rbegin(), w.rend());
  auto out = stats::pava(ry, rw);
  std::reverse(out.begin(), out.end());
  return out;
}

/// Power law over the decade starting at the smallest argument with enough hits.
inline PowerLaw fit_smallest_decade(const ThresholdCurve& c) {
  PowerLaw p;
  std::size_t start = c.x.size();
  for (std::size_t i = 0; i < c.x.size(); ++i) {
    if (c.x[i] > 0 && c.hits[i] >= kMinResolvableHits && c.value[i] > 0) {
      start = i;
      break;
    }
  }
  if (start == c.x.size()) return p;
  const double lo = c.x[start], hi = 10.0 * lo;
  std::vector<double> lx, ly;
  for (std::size_t i = start; i < c.x.size() && c.x[i] <= hi * (1 + 1e-12); ++i) {
    if (c.value[i] <= 0) continue;
    lx.push_back(std::log(c.x[i]));
    ly.push_back(std::log(c.value[i]));
  }
  if (lx.size() < 3) return p;
  const auto f = stats::ols(lx, ly);
  p.q = f.slope;
  p.log_c = f.intercept;
  p.q_se = f.slope_se;
  p.log_c_se = f.intercept_se;
  p.x_lo = lo;
  p.x_hi = std::exp(lx.back());
  p.points = lx.size();
  return p;
}

}  // namespace detail

/// Default argument grid: 0 followed by `count` log-spaced points on [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, int count, bool with_zero = true) {
  std::vector<double> g;
  if (with_zero) g.push_back(0.0);
  for (int i = 0; i < count; ++i) {
    g.push_back(count == 1 ? hi : lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Monte Carlo for g and h

struct GOptions {
  std::size_t samples = 1000000;
  std::uint64_t seed = 1;
  int workers = 1;
  std::vector<double> grid;  // u grid; default log grid up to lmax
  bool importance = false;
  double uniform_share = 0.5;                                       // mixture weight of the uniform proposal
  std::vector<double> scales = {0.003, 0.01, 0.03, 0.1, 0.3};      // perturbation radii of the local proposal
};

/// Accepted configurations from the g/h sampler.
struct GEvents {
  std::size_t samples = 0;
  double volume = 0;  // volume of the uniform sampling domain
  double lmax = 0;
  std::vector<double> dev;     // lmax - lifetime
  std::vector<double> death;   // deathtime (<= 1)
  std::vector<double> weight;  // 1 / proposal density
};

namespace detail {

inline void uniform_in_ball(Point& p, double radius, Philox& rng) {
  const int d = static_cast<int>(p.size());
  while (true) {
    double s = 0;
    for (int i = 0; i < d; ++i) {
      p[i] = radius * (2.0 * rng.uniform() - 1.0);
      s += p[i] * p[i];
    }
    if (s < radius * radius) return;
  }
}

/// Labelled templates of the conjectured optimal shape, anchored at the origin.
inline std::vector<std::vector<Point>> optimal_templates(const RegimeConfig& cfg) {
  if (cfg.d != 2) throw Unsupported("importance sampling is planar only");
  const int m = cfg.m;
  std::vector<Point> poly;
  for (int i = 0; i < m; ++i) {
    const double a = 2 * std::numbers::pi * i / m;
    poly.push_back({std::cos(a) - 1.0, std::sin(a)});  // vertex 0 sits at the origin
  }
  std::vector<int> perm(m - 1);
  std::iota(perm.begin(), perm.end(), 1);
  std::vector<std::vector<Point>> out;
  do {
    std::vector<Point> t{poly[0]};
    for (int i : perm) t.push_back(poly[i]);
    out.push_back(std::move(t));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

/// Measure of rotation angles theta with |y_j - R_theta a_j| < s for all j.
inline double rotation_measure(const std::vector<Point>& y, const std::vector<Point>& a, double s) {
  const double two_pi = 2 * std::numbers::pi;
  std::vector<std::pair<double, double>> set{{0.0, two_pi}};
  for (std::size_t j = 1; j < y.size(); ++j) {
    const double ry = std::hypot(y[j][0], y[j][1]), ra = std::hypot(a[j][0], a[j][1]);
    if (ra == 0 || ry == 0) {
      if (std::abs(ry - ra) >= s) return 0.0;
      continue;
    }
    const double c = (ry * ry + ra * ra - s * s) / (2 * ry * ra);
    if (c >= 1) return 0.0;
    if (c <= -1) continue;
    const double half = std::acos(c);
    double mid = std::atan2(y[j][1], y[j][0]) - std::atan2(a[j][1], a[j][0]);
    mid = mid - two_pi * std::floor(mid / two_pi);
    std::vector<std::pair<double, double>> arc;
    double lo = mid - half, hi = mid + half;
    if (lo < 0) {
      arc.push_back({0.0, hi});
      arc.push_back({lo + two_pi, two_pi});
    } else if (hi > two_pi) {
      arc.push_back({lo, two_pi});
      arc.push_back({0.0, hi - two_pi});
    } else {
      arc.push_back({lo, hi});
    }
    std::vector<std::pair<double, double>> next;
    for (const auto& p : set)
      for (const auto& q : arc) {
        const double l = std::max(p.first, q.first), h = std::min(p.second, q.second);
        if (h > l) next.push_back({l, h});
      }
    set.swap(next);
    if (set.empty()) return 0.0;
  }
  double total = 0;
  for (const auto& p : set) total += p.second - p.first;
  return total;
}

/// Evaluates one configuration (anchor at the origin). Returns (lifetime, death)
/// of the negative simplex on the first k points when the configuration is
/// 1-connected and that simplex dies by time 1.
inline std::optional<std::pair<double, double>> g_integrand(const std::vector<Point>& pts, const RegimeConfig& cfg) {
  const int m = cfg.m, k = cfg.k;
  const bool cech = cfg.filtration != FiltrationKind::vr;
  if (cech && m == 3 && k == 3 && cfg.d == 2) {
    // Three points: an H1 class exists iff the triangle is acute; it is born at
    // half the longest edge and dies at the circumradius.
    const double a2 = detail::squared_distance(pts[1], pts[2]);
    const double b2 = detail::squared_distance(pts[0], pts[2]);
    const double c2 = detail::squared_distance(pts[0], pts[1]);
    const double longest = std::max({a2, b2, c2});
    if (!(a2 + b2 + c2 - longest > longest)) return std::nullopt;
    const double cross = (pts[1][0] - pts[0][0]) * (pts[2][1] - pts[0][1]) - (pts[1][1] - pts[0][1]) * (pts[2][0] - pts[0][0]);
    const double r = std::sqrt(a2 * b2 * c2) / (2.0 * std::abs(cross));
    if (!(r <= 1.0)) return std::nullopt;
    const double b = 0.5 * std::sqrt(longest);
    return std::make_pair(lifetime_value(b, r, cfg.lifetime), r);
  }
  UnionFind uf(m);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (detail::squared_distance(pts[i], pts[j]) < 4.0) uf.merge(i, j);
  if (uf.set_size(0) != static_cast<std::size_t>(m)) return std::nullopt;
  const PointCloud c(Metric::euclidean(cfg.d), pts);
  Simplex first;
  for (int i = 0; i < k; ++i) first.push(i);
  for (const auto& lp : negative_simplices(c, cfg.filtration, k, 1.0)) {
    if (lp.death_simplex == first) return std::make_pair(lifetime_value(lp.birth, lp.death, cfg.lifetime), lp.death);
  }
  return std::nullopt;
}

}  // namespace detail

/// Draws N labelled configurations (0, y_2, ..., y_m) and keeps those inside
/// the support of the g integrand. The first k-1 free points are uniform on
/// B(0, 2) (a simplex dying by time 1 has diameter at most 2), the rest on
/// B(0, 2(m-1)). With `importance`, a share of draws perturbs a rotated
/// optimal template and every event carries its likelihood-ratio weight.
inline GEvents sample_g_events(const RegimeConfig& cfg, const GOptions& opt) {
  cfg.validate();
  if (cfg.m > 8) throw InvalidInput("g sampler supports m <= 8");
  const double lm = lmax(cfg.k, cfg.m, cfg.filtration, cfg.lifetime).value;
  const int d = cfg.d, m = cfg.m, k = cfg.k;
  const double near_r = 2.0, far_r = 2.0 * (m - 1);
  const double volume = std::pow(ball_volume(d, near_r), k - 1) * std::pow(ball_volume(d, far_r), m - k);
  std::vector<std::vector<Point>> templates;
  if (opt.importance) templates = detail::optimal_templates(cfg);
  const double w_uni = opt.importance ? opt.uniform_share : 1.0;

  constexpr std::size_t kChunk = 1u << 16;
  const std::size_t chunks = (opt.samples + kChunk - 1) / kChunk;
  struct Part {
    std::vector<double> dev, death, weight;
  };
  auto parts = parallel_map(chunks, opt.workers, [&](std::size_t c) {
    Philox rng(opt.seed, c);
    Part part;
    const std::size_t begin = c * kChunk, end = std::min(opt.samples, begin + kChunk);
    std::vector<Point> pts(m, Point(d, 0.0));
    for (std::size_t s = begin; s < end; ++s) {
      const bool local = opt.importance && rng.uniform() >= w_uni;
      if (!local) {
        for (int j = 1; j < m; ++j) detail::uniform_in_ball(pts[j], j < k ? near_r : far_r, rng);
      } else {
        const auto& t = templates[std::min(templates.size() - 1, static_cast<std::size_t>(rng.uniform() * templates.size()))];
        const double sc = opt.scales[std::min(opt.scales.size() - 1, static_cast<std::size_t>(rng.uniform() * opt.scales.size()))];
        const double th = 2 * std::numbers::pi * rng.uniform();
        const double ct = std::cos(th), st = std::sin(th);
        Point e(2);
        for (int j = 1; j < m; ++j) {
          detail::uniform_in_ball(e, sc, rng);
          pts[j][0] = ct * t[j][0] - st * t[j][1] + e[0];
          pts[j][1] = st * t[j][0] + ct * t[j][1] + e[1];
        }
      }
      const auto ev = detail::g_integrand(pts, cfg);
      if (!ev) continue;
      double weight = volume;
      if (opt.importance) {
        bool in_domain = true;
        for (int j = 1; j < m; ++j) {
          const double lim = j < k ? near_r : far_r;
          in_domain = in_domain && detail::squared_norm(pts[j]) < lim * lim;
        }
        double q_loc = 0;
        for (const auto& t : templates)
          for (double sc : opt.scales) {
            const double meas = detail::rotation_measure(pts, t, sc);
            if (meas > 0) q_loc += meas / (2 * std::numbers::pi) * std::pow(ball_volume(2, sc), -(m - 1));
          }
        q_loc /= static_cast<double>(templates.size() * opt.scales.size());
        const double q = w_uni * (in_domain ? 1.0 / volume : 0.0) + (1 - w_uni) * q_loc;
        weight = 1.0 / q;
      }
      part.dev.push_back(lm - ev->first);
      part.death.push_back(ev->second);
      part.weight.push_back(weight);
    }
    return part;
  });
  GEvents out;
  out.samples = opt.samples;
  out.volume = volume;
  out.lmax = lm;
  for (auto& p : parts) {
    out.dev.insert(out.dev.end(), p.dev.begin(), p.dev.end());
    out.death.insert(out.death.end(), p.death.begin(), p.death.end());
    out.weight.insert(out.weight.end(), p.weight.begin(), p.weight.end());
  }
  return out;
}

namespace detail {

/// Weighted mean and standard error of sum_i w_i 1{dev_i <= u, death_i >= 1 - v} / N.
inline std::tuple<double, double, std::size_t> g_point(const GEvents& ev, double u, double v) {
  double s = 0, s2 = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ev.dev.size(); ++i) {
    if (ev.dev[i] <= u && ev.death[i] >= 1.0 - v) {
      s += ev.weight[i];
      s2 += ev.weight[i] * ev.weight[i];
      ++hits;
    }
  }
  const double n = static_cast<double>(ev.samples);
  const double mean = s / n;
  const double var = std::max(0.0, s2 / n - mean * mean) / n;
  return {mean, std::sqrt(var), hits};
}

}  // namespace detail

inline ThresholdCurve g_curve(const GEvents& ev, std::vector<double> grid) {
  if (grid.empty()) grid = log_grid(1e-3 * ev.lmax, ev.lmax, 60);
  std::sort(grid.begin(), grid.end());
  ThresholdCurve c;
  c.samples = ev.samples;
  for (double u : grid) {
    if (u < 0) throw InvalidInput("u grid must be nonnegative");
    const auto [g, se, hits] = detail::g_point(ev, u, 1.0);
    c.x.push_back(u);
    c.value.push_back(g);
    c.se.push_back(se);
    c.hits.push_back(hits);
  }
  c.smoothed = detail::monotone_smooth(c.value, c.se, true);
  c.fit = detail::fit_smallest_decade(c);
  if (ev.samples < 10000) c.warnings.push_back("fewer than 1e4 Monte Carlo samples");
  if (!c.fit.ok()) c.warnings.push_back("power-law fit unavailable: too few resolvable grid points");
  return c;
}

inline ThresholdCurve estimate_g(const RegimeConfig& cfg, const GOptions& opt) {
  return g_curve(sample_g_events(cfg, opt), opt.grid);
}

/// Two-argument table h(u, v) on a product grid.
struct HTable {
  std::vector<double> u, v;
  std::vector<std::vector<double>> value, se, smoothed;  // [iu][iv]

  std::string to_csv() const {
    io::CsvWriter w({"u", "v", "h", "se", "smoothed"});
    for (std::size_t i = 0; i < u.size(); ++i)
      for (std::size_t j = 0; j < v.size(); ++j) w.row({u[i], v[j], value[i][j], se[i][j], smoothed[i][j]});
    return w.str();
  }
};

inline HTable h_table(const GEvents& ev, std::vector<double> ugrid, std::vector<double> vgrid) {
  if (ugrid.empty()) ugrid = log_grid(1e-3 * ev.lmax, ev.lmax, 30);
  if (vgrid.empty()) {
    for (int i = 0; i <= 10; ++i) vgrid.push_back(0.1 * i);
  }
  std::sort(ugrid.begin(), ugrid.end());
  std::sort(vgrid.begin(), vgrid.end());
  HTable t;
  t.u = ugrid;
  t.v = vgrid;
  const std::size_t nu = ugrid.size(), nv = vgrid.size();
  t.value.assign(nu, std::vector<double>(nv));
  t.se = t.value;
  for (std::size_t i = 0; i < nu; ++i)
    for (std::size_t j = 0; j < nv; ++j) {
      const auto [h, se, hits] = detail::g_point(ev, ugrid[i], vgrid[j]);
      (void)hits;
      t.value[i][j] = h;
      t.se[i][j] = se;
    }
  // Alternate row and column isotonic passes until both directions hold.
  t.smoothed = t.value;
  for (int pass = 0; pass < 50; ++pass) {
    bool changed = false;
    for (std::size_t i = 0; i < nu; ++i) {
      auto s = detail::monotone_smooth(t.smoothed[i], t.se[i], true);
      changed = changed || s != t.smoothed[i];
      t.smoothed[i] = s;
    }
    for (std::size_t j = 0; j < nv; ++j) {
      std::vector<double> col(nu), cse(nu);
      for (std::size_t i = 0; i < nu; ++i) {
        col[i] = t.smoothed[i][j];
        cse[i] = t.se[i][j];
      }
      auto s = detail::monotone_smooth(col, cse, true);
      for (std::size_t i = 0; i < nu; ++i) {
        changed = changed || s[i] != t.smoothed[i][j];
        t.smoothed[i][j] = s[i];
      }
    }
    if (!changed) break;
  }
  return t;
}

inline HTable estimate_h(const RegimeConfig& cfg, const GOptions& opt, std::vector<double> vgrid = {}) {
  return h_table(sample_g_events(cfg, opt), opt.grid, std::move(vgrid));
}

// ---------------------------------------------------------------------------
// Closed form for Cech, d = 2, m = k = 3, additive
//
// h(u,v) = 192 pi int_{lmax-u}^{lmax} int_{lo(l)}^{asin(1-l)} l^3 f(theta) dtheta dl.
// The angular parametrisation of (y2, y3) covers one orientation of the
// labelled triangle; both orientations contribute equally, hence 2 * 96 pi.

namespace detail {

/// f at theta = pi/3 + e. Working in e keeps full relative precision near pi/3,
/// where (3 theta - pi) cos theta - sin 3 theta = 3 e cos theta + sin 3e vanishes.
inline double cech33_f_shifted(double e) {
  const double theta = std::numbers::pi / 3 + e;
  const double s = std::sin(theta);
  return s * (3 * e * std::cos(theta) + std::sin(3 * e)) / (2 * std::pow(1 - s, 4));
}

}  // namespace detail

inline double cech33_f(double theta) { return detail::cech33_f_shifted(theta - std::numbers::pi / 3); }

inline double analytic_h_cech33(double u, double v) {
  const double lm = 1.0 - std::sqrt(3.0) / 2.0;
  if (!(u >= 0 && u <= lm + 1e-15)) throw InvalidInput("analytic h: u must lie in [0, lmax]");
  if (!(v >= 0 && v <= 1)) throw InvalidInput("analytic h: v must lie in [0, 1]");
  u = std::min(u, lm);
  if (u == 0 || v == 0) return 0.0;
  using boost::math::quadrature::gauss_kronrod;
  // The outer tolerance sits above the inner one so inner rounding cannot stall refinement.
  constexpr double kTol = 1e-10, kOuterTol = 1e-9;
  const double third = std::numbers::pi / 3;
  // Inner limits in the shifted variable e = theta - pi/3.
  auto lower = [&](double l) {
    if (v >= 1) return 0.0;
    const double s = 1.0 - l / (1.0 - v);
    return s <= std::sqrt(3.0) / 2.0 ? 0.0 : std::asin(std::min(1.0, s)) - third;
  };
  auto outer = [&](double l) {
    const double lo = lower(l), hi = std::asin(1.0 - l) - third;
    if (!(hi > lo)) return 0.0;
    return l * l * l * gauss_kronrod<double, 61>::integrate(detail::cech33_f_shifted, lo, hi, 10, kTol);
  };
  const double a = lm - u, b = lm;
  // The inner lower limit has a kink at l = (1 - v) lmax; split there.
  const double kink = (1.0 - v) * lm;
  double total = 0;
  if (v < 1 && kink > a && kink < b) {
    total = gauss_kronrod<double, 15>::integrate(outer, a, kink, 8, kOuterTol) +
            gauss_kronrod<double, 15>::integrate(outer, kink, b, 8, kOuterTol);
  } else {
    total = gauss_kronrod<double, 15>::integrate(outer, a, b, 8, kOuterTol);
  }
  return 192 * std::numbers::pi * total;
}

// ---------------------------------------------------------------------------
// Unbounded regime: v on the flat torus (Cech/Alpha, k = 3, multiplicative)

/// Multiplicative lifetimes of all finite H1 features of a homogeneous
/// Poisson cloud of intensity n on the flat 2-torus.
/// Copies within `margin` of the unit square are kept; if a feature is too
/// large for that margin the full 3x3 tiling is used instead.
inline std::vector<double> torus_mult_lifetimes(double n, std::uint64_t seed, std::uint64_t stream, double margin = 0.3) {
  const PointCloud cloud = sample_homogeneous(n, Window::torus(2), seed, stream);
  if (cloud.size() < 3) return {};
  for (double mg : {margin, std::numeric_limits<double>::infinity()}) {
    const TiledCloud tiled = torus_tile(cloud, mg);
    const FilteredComplex fc = alpha_filtration(tiled.lifted);
    const auto pairing = reduce(fc, {.clearing = true});
    std::vector<double> out;
    bool fits = true;
    for (const auto& f : features(pairing, fc, 1)) {
      if (!tiled.in_central_domain(f.center)) continue;
      if (f.death > std::min(mg, 0.5) / 3) fits = false;
      out.push_back(f.life_mult);
    }
    if (fits) return out;
  }
  throw Error("torus features too large for the tiled lift; the cloud is too sparse");
}

struct VOptions {
  std::size_t samples = 1000;
  std::uint64_t seed = 1;
  int workers = 1;
  std::vector<double> grid;  // lifetime grid; default linear from 1 to the largest observation
};

/// Lifetime samples (one list per cloud) behind a v-curve.
struct VSamples {
  double n = 0;
  std::vector<std::vector<double>> lifetimes;
};

inline VSamples sample_v(double n, const VOptions& opt) {
  VSamples s;
  s.n = n;
  s.lifetimes = parallel_map(opt.samples, opt.workers, [&](std::size_t i) { return torus_mult_lifetimes(n, opt.seed, i); });
  return s;
}

/// v(l) = E[#features with l* >= l] / n^3, nonincreasing.
inline ThresholdCurve v_curve(const VSamples& s, std::vector<double> grid) {
  double top = 1.0;
  for (const auto& l : s.lifetimes)
    for (double x : l) top = std::max(top, x);
  if (grid.empty()) {
    for (int i = 0; i <= 400; ++i) grid.push_back(1.0 + (top * 1.05 - 1.0) * i / 400.0);
  }
  std::sort(grid.begin(), grid.end());
  ThresholdCurve c;
  c.arg_name = "l";
  c.value_name = "v";
  c.increasing = false;
  c.samples = s.lifetimes.size();
  const double n3 = s.n * s.n * s.n;
  std::vector<double> counts(s.lifetimes.size());
  for (double l : grid) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < s.lifetimes.size(); ++i) {
      counts[i] = static_cast<double>(std::count_if(s.lifetimes[i].begin(), s.lifetimes[i].end(), [&](double x) { return x >= l; }));
      hits += static_cast<std::size_t>(counts[i]);
    }
    c.x.push_back(l);
    c.value.push_back(stats::mean(counts) / n3);
    c.se.push_back(counts.size() > 1 ? stats::standard_error(counts) / n3 : 0.0);
    c.hits.push_back(hits);
  }
  c.smoothed = detail::monotone_smooth(c.value, c.se, false);
  return c;
}

inline ThresholdCurve estimate_v(double n, const VOptions& opt) { return v_curve(sample_v(n, opt), opt.grid); }

/// l_{n,alpha} = v^{-1}(alpha / n^3) on a nonincreasing curve.
inline double invert_v(const ThresholdCurve& c, double target) {
  if (c.increasing) throw InvalidInput("invert_v expects a nonincreasing curve");
  if (target > c.smoothed.front()) return c.x.front();
  std::size_t last = c.x.size();
  for (std::size_t i = c.x.size(); i-- > 0;) {
    if (c.smoothed[i] > 0) {
      last = i;
      break;
    }
  }
  if (last == c.x.size() || target < c.smoothed[last]) {
    throw ResolutionError("v-curve has no exceedances at the requested level; increase samples");
  }
  for (std::size_t i = 1; i <= last; ++i) {
    if (c.smoothed[i] <= target) {
      const double y0 = c.smoothed[i - 1], y1 = c.smoothed[i];
      if (y0 == y1) return c.x[i];
      return c.x[i - 1] + (y0 - target) / (y0 - y1) * (c.x[i] - c.x[i - 1]);
    }
  }
  return c.x[last];
}

// ---------------------------------------------------------------------------
// Threshold inversion

struct ThresholdResult {
  double u = 0;
  double u_lo = 0;
  double u_hi = 0;
  double target = 0;
  bool extrapolated = false;
  std::vector<std::string> warnings;

  io::json to_json() const {
    return {{"u", u}, {"u_lo", u_lo}, {"u_hi", u_hi}, {"target", target}, {"extrapolated", extrapolated},
            {"warnings", warnings}};
  }
};

namespace detail {

/// Smallest x with y(x) >= target on an increasing piecewise-linear curve.
inline double invert_increasing(const std::vector<double>& x, const std::vector<double>& y, double target) {
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (y[i] >= target) {
      const double y0 = y[i - 1], y1 = y[i];
      if (y1 == y0) return x[i];
      // Bisection on the linear segment; exact for a line, kept general.
      double lo = x[i - 1], hi = x[i];
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double ym = y0 + (mid - x[i - 1]) / (x[i] - x[i - 1]) * (y1 - y0);
        (ym >= target ? hi : lo) = mid;
      }
      return hi;
    }
  }
  return x.back();
}

}  // namespace detail

/// Extrapolation is allowed at most this many decades of u below the resolvable range.
inline constexpr double kExtrapolationDecades = 3.0;

inline ThresholdResult threshold_u(const ThresholdCurve& c, const RegimeConfig& cfg) {
  if (!c.increasing) throw InvalidInput("threshold_u expects an increasing curve");
  ThresholdResult r;
  r.target = cfg.target();
  r.warnings = cfg.warnings();
  if (cfg.alpha == 0) return r;
  const double top = c.smoothed.back();
  if (r.target > top) {
    throw ResolutionError("target " + io::fmt(r.target) + " exceeds the largest tabulated value " + io::fmt(top) +
                          "; alpha is larger than the available budget");
  }
  // Smallest resolvable tabulated value.
  std::size_t first = c.x.size();
  for (std::size_t i = 0; i < c.x.size(); ++i) {
    if (c.x[i] > 0 && c.hits[i] >= detail::kMinResolvableHits && c.smoothed[i] > 0) {
      first = i;
      break;
    }
  }
  if (first < c.x.size() && r.target >= c.smoothed[first]) {
    r.u = detail::invert_increasing(c.x, c.smoothed, r.target);
    std::vector<double> up(c.x.size()), down(c.x.size());
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      up[i] = c.smoothed[i] + 1.96 * c.se[i];
      down[i] = std::max(0.0, c.smoothed[i] - 1.96 * c.se[i]);
    }
    r.u_lo = detail::invert_increasing(c.x, detail::monotone_smooth(up, c.se, true), r.target);
    r.u_hi = detail::invert_increasing(c.x, detail::monotone_smooth(down, c.se, true), r.target);
    return r;
  }
  if (!c.fit.ok()) throw ResolutionError("target below the resolvable range and no power-law fit available");
  const double floor_u = c.fit.x_lo * std::pow(10.0, -kExtrapolationDecades);
  if (r.target < c.fit(floor_u)) {
    throw ResolutionError("target " + io::fmt(r.target) + " lies below the extrapolation floor; increase samples or use importance mode");
  }
  r.extrapolated = true;
  r.u = c.fit.inverse(r.target);
  const double z = 1.96;
  const double a = std::exp((std::log(r.target) - c.fit.log_c - z * c.fit.log_c_se) / (c.fit.q + z * c.fit.q_se));
  const double b = std::exp((std::log(r.target) - c.fit.log_c + z * c.fit.log_c_se) / std::max(c.fit.q - z * c.fit.q_se, 1e-3));
  r.u_lo = std::min({a, b, r.u});
  r.u_hi = std::max({a, b, r.u});
  r.warnings.push_back("u extrapolated by the fitted power law below the tabulated range");
  return r;
}

// ---------------------------------------------------------------------------
// Extremal points

struct ExtremalPoint {
  Point center;
  double u = 0;  // (lmax - scaled lifetime) / u_{n,alpha}
  double v = 0;  // (r_n - deathtime) / u_{n,alpha}
  double lifetime = 0;
  double death = 0;
};

struct ExtremesResult {
  std::vector<ExtremalPoint> points;
  std::size_t clusters = 0;
  std::size_t oversize_clusters = 0;       // skipped, larger than the brute-force limit
  std::size_t multi_exceedance_clusters = 0;
  std::size_t above_lmax = 0;  // lifetimes beyond lmax: negative marks, outside the mark space

  /// Mark restriction to u <= 1 (the centres form xi^2, centres and u form xi^3).
  std::vector<ExtremalPoint> restrict_u(double cap = 1.0) const {
    std::vector<ExtremalPoint> out;
    for (const auto& p : points) {
      if (p.u <= cap) out.push_back(p);
    }
    return out;
  }
};

inline std::string extremes_to_csv(const std::vector<ExtremalPoint>& pts, int d) {
  static const char* names[] = {"cx", "cy", "cz", "cw"};
  std::vector<std::string> header;
  for (int i = 0; i < d; ++i) header.push_back(i < 4 ? names[i] : "c" + std::to_string(i));
  header.push_back("u");
  header.push_back("v");
  io::CsvWriter w(header);
  for (const auto& p : pts) {
    std::vector<double> row = p.center;
    row.push_back(p.u);
    row.push_back(p.v);
    w.row(row);
  }
  return w.str();
}

/// Scaled lifetime deviations of negative k-simplices found inside clusters.
/// Points joined at distance < 2 r_n form the clusters, so every simplex that
/// dies by r_n is contained in one. Emits the simplices whose deviation is at
/// most u_cap * u_n (u_cap = 1 gives the threshold exceedances). Lifetimes
/// above lmax, only possible in clusters of more than m points, would carry a
/// negative mark; they are counted and left out.
inline ExtremesResult extract_extremes(const PointCloud& cloud, const RegimeConfig& cfg, double u_n, double u_cap = 1.0) {
  cfg.validate();
  ExtremesResult res;
  if (!(u_n >= 0)) throw InvalidInput("threshold must be nonnegative");
  const double lm = lmax(cfg.k, cfg.m, cfg.filtration, cfg.lifetime).value;
  if (cloud.size() < static_cast<std::size_t>(cfg.k)) return res;
  const auto part = clusters(cloud, 2.0 * cfg.r_n);
  std::vector<Point> pts;
  for (const auto& mem : part.members) {
    if (mem.size() < static_cast<std::size_t>(cfg.k)) continue;
    ++res.clusters;
    if (mem.size() > kCechBruteforceLimit) {
      ++res.oversize_clusters;
      continue;
    }
    pts.clear();
    for (int i : mem) pts.push_back(cloud[i]);
    const PointCloud sub(cloud.metric, pts);
    std::size_t emitted = 0;
    for (const auto& lp : negative_simplices(sub, cfg.filtration, cfg.k, cfg.r_n)) {
      const double life = lifetime_value(lp.birth, lp.death, cfg.lifetime, cfg.r_n);
      const double dev = lm - life;
      if (u_n == 0 || !(dev <= u_cap * u_n)) continue;
      if (dev < -1e-12) {
        ++res.above_lmax;
        continue;
      }
      std::vector<Point> verts;
      for (int v : lp.death_simplex) verts.push_back(sub[v]);
      ExtremalPoint e;
      e.center = min_enclosing_ball(verts, cloud.metric).center;
      if (cloud.metric.is_torus()) {
        for (double& x : e.center) x -= cloud.metric.period * std::floor(x / cloud.metric.period);
      }
      e.u = std::max(0.0, dev) / u_n;
      e.v = (cfg.r_n - lp.death) / u_n;
      e.lifetime = life;
      e.death = lp.death;
      res.points.push_back(std::move(e));
      ++emitted;
    }
    if (emitted > 1) ++res.multi_exceedance_clusters;
  }
  return res;
}

}  // namespace llc
