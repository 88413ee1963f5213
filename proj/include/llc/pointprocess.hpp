#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "random.hpp"
#include "stats.hpp"
#include "union_find.hpp"

namespace llc {

/// Sampling window: the unit cube, the flat unit torus, or a box [lo, hi]^d.
struct Window {
  enum class Kind { cube, torus, box };
  Kind kind = Kind::cube;
  int dim = 2;
  double lo = 0.0;
  double hi = 1.0;

  static Window cube(int d) { return {Kind::cube, d, 0.0, 1.0}; }
  static Window torus(int d) { return {Kind::torus, d, 0.0, 1.0}; }
  static Window box(int d, double lo, double hi) {
    if (!(hi > lo)) throw InvalidInput("box window needs lo < hi");
    return {Kind::box, d, lo, hi};
  }

  double side() const { return hi - lo; }
  double volume() const { return std::pow(side(), dim); }
  Metric metric() const { return kind == Kind::torus ? Metric::torus(dim) : Metric::euclidean(dim); }
  bool contains(const Point& p) const {
    for (double x : p) {
      if (x < lo || x > hi) return false;
    }
    return true;
  }
  /// Distance from p to the window boundary (infinite on the torus).
  double boundary_distance(const Point& p) const {
    if (kind == Kind::torus) return std::numeric_limits<double>::infinity();
    double d = std::numeric_limits<double>::infinity();
    for (double x : p) d = std::min({d, x - lo, hi - x});
    return d;
  }

  std::string to_string() const {
    switch (kind) {
      case Kind::cube: return "cube";
      case Kind::torus: return "torus";
      case Kind::box: return "box:" + io::fmt(lo) + "," + io::fmt(hi);
    }
    return "?";
  }
};

/// Parses `cube`, `torus` or `box:lo,hi`.
inline Window parse_window(const std::string& s, int d = 2) {
  if (s == "cube") return Window::cube(d);
  if (s == "torus") return Window::torus(d);
  if (s.rfind("box:", 0) == 0) {
    const auto body = s.substr(4);
    const auto comma = body.find(',');
    if (comma == std::string::npos) throw InvalidInput("box window expects box:lo,hi");
    try {
      return Window::box(d, std::stod(body.substr(0, comma)), std::stod(body.substr(comma + 1)));
    } catch (const std::invalid_argument&) {
      throw InvalidInput("box window bounds must be numbers");
    }
  }
  throw InvalidInput("unknown window: " + s);
}

/// Intensity profile kappa on a window, with a known upper bound kappa*.
struct DensitySpec {
  enum class Kind { constant, gaussian, grid };
  Kind kind = Kind::constant;
  Window support = Window::cube(2);
  double level = 1.0;  // constant value
  double scale = 1.0;  // Gaussian standard deviation
  int nx = 0, ny = 0;  // grid cells, row-major values over the support box
  std::vector<double> values;
  double kappa_star = 1.0;

  static DensitySpec constant(Window w, double level = 1.0) {
    if (!(level > 0)) throw DensitySpecError("constant density must be positive");
    DensitySpec s;
    s.kind = Kind::constant;
    s.support = w;
    s.level = level;
    s.kappa_star = level;
    return s;
  }

  /// Standard Gaussian density with deviation `scale`, truncated to `w`.
  static DensitySpec gaussian(Window w, double scale = 1.0) {
    if (!(scale > 0)) throw DensitySpecError("gaussian scale must be positive");
    DensitySpec s;
    s.kind = Kind::gaussian;
    s.support = w;
    s.scale = scale;
    s.kappa_star = std::pow(2 * std::numbers::pi * scale * scale, -0.5 * w.dim);
    return s;
  }

  static DensitySpec grid(Window w, int nx, int ny, std::vector<double> values, double kappa_star = -1) {
    if (w.dim != 2) throw DensitySpecError("grid density is planar");
    if (nx <= 0 || ny <= 0 || values.size() != static_cast<std::size_t>(nx) * ny) {
      throw DensitySpecError("grid density: value count does not match nx*ny");
    }
    DensitySpec s;
    s.kind = Kind::grid;
    s.support = w;
    s.nx = nx;
    s.ny = ny;
    s.values = std::move(values);
    for (double v : s.values) {
      if (!(v >= 0) || !std::isfinite(v)) throw DensitySpecError("grid density values must be finite and nonnegative");
    }
    s.kappa_star = kappa_star > 0 ? kappa_star : *std::max_element(s.values.begin(), s.values.end());
    if (!(s.kappa_star > 0)) throw DensitySpecError("grid density is identically zero");
    return s;
  }

  double operator()(const Point& y) const {
    if (support.kind != Window::Kind::torus && !support.contains(y)) return 0.0;
    switch (kind) {
      case Kind::constant: return level;
      case Kind::gaussian: {
        double r2 = 0;
        for (double x : y) r2 += x * x;
        return std::pow(2 * std::numbers::pi * scale * scale, -0.5 * support.dim) *
               std::exp(-0.5 * r2 / (scale * scale));
      }
      case Kind::grid: {
        const double u = (y[0] - support.lo) / support.side(), v = (y[1] - support.lo) / support.side();
        const int i = std::clamp(static_cast<int>(u * nx), 0, nx - 1);
        const int j = std::clamp(static_cast<int>(v * ny), 0, ny - 1);
        return values[static_cast<std::size_t>(j) * nx + i];
      }
    }
    return 0.0;
  }

  /// Integral of kappa^m over the box [lo, hi]^d intersected with the support.
  double integral_power(int m, const std::vector<double>& lo, const std::vector<double>& hi) const {
    const int d = support.dim;
    std::vector<double> a(d), b(d);
    for (int i = 0; i < d; ++i) {
      a[i] = std::max(lo[i], support.lo);
      b[i] = std::min(hi[i], support.hi);
      if (b[i] <= a[i]) return 0.0;
    }
    switch (kind) {
      case Kind::constant: {
        double vol = 1;
        for (int i = 0; i < d; ++i) vol *= b[i] - a[i];
        return std::pow(level, m) * vol;
      }
      case Kind::gaussian: {
        // kappa^m factorizes over coordinates.
        const double c = std::sqrt(0.5 * m) / scale;
        double prod = std::pow(2 * std::numbers::pi * scale * scale, -0.5 * d * m);
        for (int i = 0; i < d; ++i) {
          prod *= scale * std::sqrt(std::numbers::pi / (2.0 * m)) * (std::erf(c * b[i]) - std::erf(c * a[i]));
        }
        return prod;
      }
      case Kind::grid: {
        const double wx = support.side() / nx, wy = support.side() / ny;
        double s = 0;
        for (int j = 0; j < ny; ++j) {
          const double y0 = support.lo + j * wy, y1 = y0 + wy;
          const double oy = std::min(y1, b[1]) - std::max(y0, a[1]);
          if (oy <= 0) continue;
          for (int i = 0; i < nx; ++i) {
            const double x0 = support.lo + i * wx, x1 = x0 + wx;
            const double ox = std::min(x1, b[0]) - std::max(x0, a[0]);
            if (ox <= 0) continue;
            s += std::pow(values[static_cast<std::size_t>(j) * nx + i], m) * ox * oy;
          }
        }
        return s;
      }
    }
    return 0.0;
  }

  /// gamma = integral of kappa^m over the whole support.
  double integral_power(int m) const {
    return integral_power(m, std::vector<double>(support.dim, support.lo), std::vector<double>(support.dim, support.hi));
  }

  io::json to_json() const {
    io::json j{{"support", support.to_string()}, {"kappa_star", kappa_star}};
    switch (kind) {
      case Kind::constant: j["kind"] = "constant"; j["level"] = level; break;
      case Kind::gaussian: j["kind"] = "gaussian"; j["scale"] = scale; break;
      case Kind::grid: j["kind"] = "grid"; j["nx"] = nx; j["ny"] = ny; break;
    }
    return j;
  }
};

/// Parses `const`, `const:level`, `gauss:scale` or `grid:path` (CSV of rows).
inline DensitySpec parse_density(const std::string& s, const Window& w) {
  auto arg = [&](std::size_t at) { return s.substr(at); };
  try {
    if (s == "const") return DensitySpec::constant(w);
    if (s.rfind("const:", 0) == 0) return DensitySpec::constant(w, std::stod(arg(6)));
    if (s == "gauss") return DensitySpec::gaussian(w);
    if (s.rfind("gauss:", 0) == 0) return DensitySpec::gaussian(w, std::stod(arg(6)));
  } catch (const std::invalid_argument&) {
    throw DensitySpecError("density parameter must be a number: " + s);
  }
  if (s.rfind("grid:", 0) == 0) {
    const std::string text = io::read_text(arg(5));
    std::vector<double> vals;
    int nx = -1, ny = 0;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string cell;
      int count = 0;
      while (std::getline(ls, cell, ',')) {
        vals.push_back(std::stod(cell));
        ++count;
      }
      if (nx < 0) nx = count;
      if (count != nx) throw DensitySpecError("grid density: ragged rows");
      ++ny;
    }
    return DensitySpec::grid(w, nx, ny, std::move(vals));
  }
  throw DensitySpecError("unknown density: " + s);
}

namespace detail {

inline long poisson_count(double mean, Philox& rng) {
  if (!(mean >= 0) || !std::isfinite(mean)) throw InvalidInput("poisson mean must be finite and nonnegative");
  if (mean == 0) return 0;
  std::poisson_distribution<long> pois(mean);
  return pois(rng);
}

}  // namespace detail

/// Homogeneous Poisson process of intensity n on the window.
inline PointCloud sample_homogeneous(double n, const Window& w, std::uint64_t seed, std::uint64_t stream = 0) {
  if (!(n > 0)) throw InvalidInput("intensity must be positive");
  Philox rng(seed, stream);
  const long count = detail::poisson_count(n * w.volume(), rng);
  PointCloud c(w.metric(), {});
  c.points.reserve(count);
  for (long i = 0; i < count; ++i) {
    Point p(w.dim);
    for (double& x : p) {
      x = w.lo + w.side() * rng.uniform();
      if (w.kind == Window::Kind::torus && x >= w.hi) x = w.lo;
    }
    c.points.push_back(std::move(p));
  }
  return c;
}

/// Poisson process with intensity n*kappa by thinning a homogeneous process
/// of intensity n*kappa* on the support.
inline PointCloud sample_inhomogeneous(double n, const DensitySpec& spec, std::uint64_t seed, std::uint64_t stream = 0) {
  if (!(n > 0)) throw InvalidInput("intensity must be positive");
  PointCloud base = sample_homogeneous(n * spec.kappa_star, spec.support, seed, stream);
  // Acceptance draws come from a sibling stream so the base cloud is shared.
  Philox rng(seed ^ 0x7468696e6e696e67ULL, stream);
  PointCloud out(base.metric, {});
  for (auto& p : base.points) {
    const double k = spec(p);
    if (k > spec.kappa_star * (1 + 1e-12)) {
      throw DensitySpecError("density exceeds its declared bound kappa* = " + io::fmt(spec.kappa_star));
    }
    if (rng.uniform() * spec.kappa_star < k) out.points.push_back(std::move(p));
  }
  return out;
}

/// Connected components of the graph joining points at distance < r.
struct ClusterPartition {
  std::vector<int> label;                 // point -> cluster id
  std::vector<std::vector<int>> members;  // cluster id -> sorted members

  std::size_t size() const { return members.size(); }
};

namespace detail {

inline ClusterPartition partition_from(UnionFind& uf, std::size_t n) {
  ClusterPartition out;
  out.label.assign(n, -1);
  std::vector<int> root_label(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = uf.find(i);
    if (root_label[r] < 0) {
      root_label[r] = static_cast<int>(out.members.size());
      out.members.emplace_back();
    }
    out.label[i] = root_label[r];
    out.members[root_label[r]].push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace detail

inline ClusterPartition clusters(const PointCloud& cloud, double r) {
  if (!(r > 0)) throw InvalidInput("clusters: r must be positive");
  const std::size_t n = cloud.size();
  const int d = cloud.dim();
  const Metric& m = cloud.metric;
  UnionFind uf(n);
  const double r2 = r * r;
  const bool torus = m.is_torus();
  auto close = [&](std::size_t i, std::size_t j) {
    double s = 0;
    for (int k = 0; k < d; ++k) {
      double t = cloud[i][k] - cloud[j][k];
      if (torus) t = detail::wrap_delta(t, m.period);
      s += t * t;
    }
    return s < r2;
  };

  if (n == 0) return detail::partition_from(uf, n);
  auto brute = [&] {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (close(i, j)) uf.merge(i, j);
    return detail::partition_from(uf, n);
  };

  // Dense grid of cells at least r wide, about 4n cells in total; points are
  // bucketed by counting sort and each point scans the 3^d surrounding cells.
  const double target_cells = std::pow(4.0 * static_cast<double>(n) + 16.0, 1.0 / d);
  std::vector<double> lo(d), width(d);
  std::vector<long> cells(d);
  for (int k = 0; k < d; ++k) {
    if (torus) {
      lo[k] = 0;
      cells[k] = static_cast<long>(std::min(std::floor(m.period / r), target_cells));
      if (cells[k] < 3) return brute();
      width[k] = m.period / static_cast<double>(cells[k]);
    } else {
      double a = cloud[0][k], b = a;
      for (std::size_t i = 1; i < n; ++i) {
        a = std::min(a, cloud[i][k]);
        b = std::max(b, cloud[i][k]);
      }
      lo[k] = a;
      width[k] = std::max(r, (b - a) / target_cells);
      cells[k] = static_cast<long>(std::floor((b - a) / width[k])) + 1;
    }
  }
  std::size_t total = 1;
  for (long c : cells) total *= static_cast<std::size_t>(c);
  std::vector<std::size_t> cell_of(n);
  std::vector<long> coord(static_cast<std::size_t>(n) * d);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t lin = 0;
    for (int k = d - 1; k >= 0; --k) {
      long c = static_cast<long>(std::floor((cloud[i][k] - lo[k]) / width[k]));
      c = torus ? ((c % cells[k]) + cells[k]) % cells[k] : std::clamp(c, 0L, cells[k] - 1);
      coord[i * d + k] = c;
      lin = lin * static_cast<std::size_t>(cells[k]) + static_cast<std::size_t>(c);
    }
    cell_of[i] = lin;
  }
  std::vector<std::size_t> start(total + 1, 0);
  for (std::size_t i = 0; i < n; ++i) ++start[cell_of[i] + 1];
  for (std::size_t c = 0; c < total; ++c) start[c + 1] += start[c];
  std::vector<int> bucket(n);
  {
    std::vector<std::size_t> fill(start.begin(), start.end() - 1);
    for (std::size_t i = 0; i < n; ++i) bucket[fill[cell_of[i]]++] = static_cast<int>(i);
  }
  long offsets = 1;
  for (int k = 0; k < d; ++k) offsets *= 3;
  for (std::size_t i = 0; i < n; ++i) {
    for (long o = 0; o < offsets; ++o) {
      long rem = o;
      std::size_t lin = 0;
      bool valid = true;
      for (int k = d - 1; k >= 0; --k) {
        long c = coord[i * d + k] + rem % 3 - 1;
        rem /= 3;
        if (torus) {
          c = (c + cells[k]) % cells[k];
        } else if (c < 0 || c >= cells[k]) {
          valid = false;
          break;
        }
        lin = lin * static_cast<std::size_t>(cells[k]) + static_cast<std::size_t>(c);
      }
      if (!valid) continue;
      for (std::size_t t = start[lin]; t < start[lin + 1]; ++t) {
        const int j = bucket[t];
        if (static_cast<std::size_t>(j) > i && close(i, j)) uf.merge(i, j);
      }
    }
  }
  return detail::partition_from(uf, n);
}

/// hist[j] = number of clusters with exactly j points.
inline std::vector<std::size_t> cluster_census(const PointCloud& cloud, double r) {
  const auto part = clusters(cloud, r);
  std::vector<std::size_t> hist(cloud.size() + 1, 0);
  for (const auto& mem : part.members) hist[mem.size()]++;
  return hist;
}

/// Calls f(indices) once for every subset of at most jmax points whose graph
/// at distance < r is connected (indices into the cloud, unordered).
/// Subsets are enumerated inside each component by extension from their
/// smallest vertex, so each is visited once.
template <class F>
void for_each_connected_subset(const PointCloud& cloud, double r, int jmax, F&& f) {
  if (jmax < 1) throw InvalidInput("connected subsets: jmax must be positive");
  const auto part = clusters(cloud, r);
  std::vector<int> ids;
  for (const auto& mem : part.members) {
    const std::size_t s = mem.size();
    std::vector<std::vector<int>> adj(s);
    for (std::size_t a = 0; a < s; ++a)
      for (std::size_t b = a + 1; b < s; ++b)
        if (distance(cloud[mem[a]], cloud[mem[b]], cloud.metric) < r) {
          adj[a].push_back(static_cast<int>(b));
          adj[b].push_back(static_cast<int>(a));
        }
    std::vector<char> seen(s, 0);
    std::vector<int> sub;
    // ext: candidates larger than root, adjacent to sub, not yet excluded.
    auto extend = [&](auto&& self, int root, std::vector<int> ext) -> void {
      ids.clear();
      for (int v : sub) ids.push_back(mem[v]);
      f(static_cast<const std::vector<int>&>(ids));
      if (static_cast<int>(sub.size()) == jmax) return;
      while (!ext.empty()) {
        const int w = ext.back();
        ext.pop_back();
        std::vector<int> next = ext;
        std::vector<int> added;
        for (int x : adj[w]) {
          if (x > root && !seen[x]) {
            seen[x] = 1;
            added.push_back(x);
            next.push_back(x);
          }
        }
        sub.push_back(w);
        self(self, root, std::move(next));
        sub.pop_back();
        for (int x : added) seen[x] = 0;
      }
    };
    for (std::size_t v = 0; v < s; ++v) {
      const int root = static_cast<int>(v);
      std::fill(seen.begin(), seen.end(), 0);
      seen[root] = 1;
      std::vector<int> ext;
      for (int x : adj[root]) {
        if (x > root) {
          seen[x] = 1;
          ext.push_back(x);
        }
      }
      sub.assign(1, root);
      extend(extend, root, std::move(ext));
    }
  }
}

/// out[j] = number of j-point subsets (j <= jmax) whose graph at distance < r
/// is connected. Ordered j-tuples in a cluster at level r number j! times this.
inline std::vector<double> connected_subset_counts(const PointCloud& cloud, double r, int jmax) {
  std::vector<double> out(std::max(jmax, 0) + 1, 0.0);
  for_each_connected_subset(cloud, r, jmax, [&](const std::vector<int>& ids) { out[ids.size()] += 1.0; });
  return out;
}

/// Numeric check of the two smoothness conditions on kappa: the local
/// modulus over pairs within 2*m*r and the boundary mass within 2*m*r of
/// the window edge should both decay linearly in r.
struct AssumptionPReport {
  std::vector<double> r;
  std::vector<double> modulus;
  std::vector<double> boundary;
  double modulus_slope = 0;
  double boundary_slope = 0;
  bool modulus_ok = false;
  bool boundary_ok = false;
  bool ok() const { return modulus_ok && boundary_ok; }
};

inline AssumptionPReport assumption_p_check(const DensitySpec& spec, int m, const std::vector<double>& r_grid,
                                            std::size_t samples, std::uint64_t seed) {
  if (r_grid.size() < 2) throw InvalidInput("assumption_p_check: need at least two radii");
  const Window& w = spec.support;
  const int d = w.dim;
  Philox rng(seed, 0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  // Common random numbers across radii: base points, directions, fractions.
  std::vector<Point> ys(samples), dirs(samples);
  std::vector<double> frac(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    ys[s].resize(d);
    dirs[s].resize(d);
    double norm = 0;
    for (int k = 0; k < d; ++k) {
      ys[s][k] = w.lo + w.side() * rng.uniform();
      dirs[s][k] = gauss(rng);
      norm += dirs[s][k] * dirs[s][k];
    }
    for (double& x : dirs[s]) x /= std::sqrt(norm);
    frac[s] = rng.uniform();
  }
  AssumptionPReport rep;
  for (double r : r_grid) {
    const double reach = 2.0 * m * r;
    double sup = 0, mass = 0;
    for (std::size_t s = 0; s < samples; ++s) {
      const double ky = spec(ys[s]);
      for (double t : {frac[s], 1.0}) {
        Point y2 = ys[s];
        for (int k = 0; k < d; ++k) y2[k] += t * reach * dirs[s][k];
        if (w.kind == Window::Kind::torus) {
          for (double& x : y2) x -= std::floor(x);
        } else if (!w.contains(y2)) {
          continue;
        }
        sup = std::max(sup, std::abs(ky - spec(y2)));
      }
      if (w.boundary_distance(ys[s]) < reach) mass += ky;
    }
    rep.r.push_back(r);
    rep.modulus.push_back(sup);
    rep.boundary.push_back(mass * w.volume() / static_cast<double>(samples));
  }
  auto slope_ok = [&](const std::vector<double>& v, double& slope) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] > 0) {
        lx.push_back(std::log(rep.r[i]));
        ly.push_back(std::log(v[i]));
      }
    }
    if (lx.empty()) {
      slope = 0;  // vanishes identically: trivially O(r)
      return true;
    }
    if (lx.size() < 2) {
      slope = std::numeric_limits<double>::quiet_NaN();
      return false;
    }
    slope = stats::ols(lx, ly).slope;
    // Faster-than-linear decay is still O(r).
    return slope >= 0.8;
  };
  rep.modulus_ok = slope_ok(rep.modulus, rep.modulus_slope);
  rep.boundary_ok = slope_ok(rep.boundary, rep.boundary_slope);
  return rep;
}

inline io::json cloud_manifest(double n, const Window& w, const DensitySpec* spec, std::uint64_t seed, std::size_t count) {
  io::json j{{"seed", seed}, {"intensity", n}, {"window", w.to_string()}, {"count", count}};
  j["density"] = spec ? spec->to_json() : io::json{{"kind", "constant"}, {"level", 1.0}};
  return j;
}

}  // namespace llc
