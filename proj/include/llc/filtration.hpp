#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <locale>
#include <map>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "delaunay.hpp"
#include "errors.hpp"
#include "geometry.hpp"

namespace llc {

inline constexpr int kMaxSimplexVertices = 10;
inline constexpr std::size_t kCechBruteforceLimit = 16;
inline constexpr std::size_t kRipsBruteforceLimit = 32;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Sorted vertex tuple stored inline (at most kMaxSimplexVertices vertices).
class Simplex {
 public:
  Simplex() = default;
  Simplex(std::initializer_list<int> vs) {
    for (int v : vs) push(v);
    normalize();
  }
  explicit Simplex(std::span<const int> vs) {
    for (int v : vs) push(v);
    normalize();
  }

  void push(int v) {
    if (n_ >= kMaxSimplexVertices) throw SizeLimit("simplex: too many vertices");
    v_[n_++] = v;
  }

  std::size_t size() const { return n_; }
  int dim() const { return static_cast<int>(n_) - 1; }
  int operator[](std::size_t i) const { return v_[i]; }
  const int* begin() const { return v_.data(); }
  const int* end() const { return v_.data() + n_; }
  std::span<const int> vertices() const { return {v_.data(), n_}; }

  /// Facet obtained by dropping vertex i.
  Simplex facet(std::size_t i) const {
    Simplex f;
    for (std::size_t j = 0; j < n_; ++j) {
      if (j != i) f.v_[f.n_++] = v_[j];
    }
    return f;
  }

  friend bool operator==(const Simplex& a, const Simplex& b) {
    return a.n_ == b.n_ && std::equal(a.begin(), a.end(), b.begin());
  }
  friend bool operator<(const Simplex& a, const Simplex& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
  }

  std::size_t hash() const {
    std::size_t h = n_;
    for (std::size_t i = 0; i < n_; ++i) {
      h ^= static_cast<std::size_t>(v_[i]) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }

 private:
  void normalize() {
    std::sort(v_.begin(), v_.begin() + n_);
    for (std::size_t i = 1; i < n_; ++i) {
      if (v_[i] == v_[i - 1]) throw InvalidInput("simplex: repeated vertex");
    }
  }

  std::array<int, kMaxSimplexVertices> v_{};
  std::uint8_t n_ = 0;
};

struct SimplexHash {
  std::size_t operator()(const Simplex& s) const { return s.hash(); }
};

enum class FiltrationKind { cech, alpha, vr };

inline std::string to_string(FiltrationKind k) {
  switch (k) {
    case FiltrationKind::cech: return "cech";
    case FiltrationKind::alpha: return "alpha";
    case FiltrationKind::vr: return "vr";
  }
  return "?";
}

struct FilteredSimplex {
  Simplex simplex;
  double value = 0.0;
  double tie = 0.0;  // label-free secondary key among equal values
};

/// Canonical reduction order: value, dimension, tie key, then lexicographic.
inline bool filtration_less(const FilteredSimplex& a, const FilteredSimplex& b) {
  if (a.value != b.value) return a.value < b.value;
  if (a.simplex.size() != b.simplex.size()) return a.simplex.size() < b.simplex.size();
  if (a.tie != b.tie) return a.tie < b.tie;
  return a.simplex < b.simplex;
}

struct FilteredComplex {
  std::shared_ptr<const PointCloud> cloud;
  FiltrationKind kind = FiltrationKind::cech;
  std::vector<FilteredSimplex> simplices;

  std::size_t size() const { return simplices.size(); }
  bool empty() const { return simplices.empty(); }
  const FilteredSimplex& operator[](std::size_t i) const { return simplices[i]; }

  void sort() { std::sort(simplices.begin(), simplices.end(), filtration_less); }

  bool is_sorted() const {
    for (std::size_t i = 1; i < simplices.size(); ++i) {
      if (!filtration_less(simplices[i - 1], simplices[i])) return false;
    }
    return true;
  }
};

/// One line per simplex, `v0,v1,...:value`, in reduction order.
inline void write_complex(std::ostream& os, const FilteredComplex& fc) {
  std::ostringstream line;
  line.imbue(std::locale::classic());
  line << std::setprecision(17);
  for (const auto& fs : fc.simplices) {
    for (std::size_t i = 0; i < fs.simplex.size(); ++i) {
      if (i) line << ',';
      line << fs.simplex[i];
    }
    line << ':' << fs.value << '\n';
  }
  os << line.str();
}

inline std::string complex_to_string(const FilteredComplex& fc) {
  std::ostringstream os;
  write_complex(os, fc);
  return os.str();
}

/// Brute-force Čech filtration: every subset of at most max_dim+1 points,
/// valued by its smallest enclosing ball radius.
inline FilteredComplex cech_bruteforce(const PointCloud& cloud, int max_dim, double r_max) {
  const std::size_t n = cloud.size();
  if (n > kCechBruteforceLimit) throw SizeLimit("cech_bruteforce: more than 16 points");
  if (max_dim < 0 || max_dim > cloud.dim() + 1) {
    throw InvalidInput("cech_bruteforce: max_dim must lie in [0, d+1]");
  }
  FilteredComplex fc;
  fc.cloud = std::make_shared<const PointCloud>(cloud);
  fc.kind = FiltrationKind::cech;
  if (n == 0) return fc;

  const std::uint32_t full = 1u << n;
  std::vector<double> value(full, kInfinity);
  std::vector<Point> pts;
  // Masks in increasing popcount so every facet is valued first.
  std::vector<std::uint32_t> masks;
  for (std::uint32_t m = 1; m < full; ++m) {
    if (std::popcount(m) <= max_dim + 1) masks.push_back(m);
  }
  std::stable_sort(masks.begin(), masks.end(),
                   [](std::uint32_t a, std::uint32_t b) { return std::popcount(a) < std::popcount(b); });
  for (std::uint32_t m : masks) {
    double facet_max = 0.0;
    bool facets_in = true;
    if (std::popcount(m) > 1) {
      for (std::uint32_t rest = m; rest; rest &= rest - 1) {
        const double fv = value[m & ~(rest & -rest)];
        if (!(fv <= r_max)) {
          facets_in = false;
          break;
        }
        facet_max = std::max(facet_max, fv);
      }
    }
    if (!facets_in) continue;
    pts.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (m & (1u << i)) pts.push_back(cloud.points[i]);
    }
    // max with facets guards monotonicity against last-ulp rounding.
    const double v = std::max(min_enclosing_ball(pts, cloud.metric).radius, facet_max);
    if (v > r_max) continue;
    value[m] = v;
    Simplex s;
    for (std::size_t i = 0; i < n; ++i) {
      if (m & (1u << i)) s.push(static_cast<int>(i));
    }
    fc.simplices.push_back({s, v});
  }
  fc.sort();
  return fc;
}

/// Vietoris-Rips filtration valued by half the largest pairwise distance.
inline FilteredComplex vietoris_rips(const PointCloud& cloud, int max_dim, double r_max) {
  const std::size_t n = cloud.size();
  if (max_dim < 0) throw InvalidInput("vietoris_rips: negative max_dim");
  if (max_dim >= 2 && n > kRipsBruteforceLimit) {
    throw SizeLimit("vietoris_rips: more than 32 points with max_dim >= 2");
  }
  if (max_dim + 1 > kMaxSimplexVertices) throw SizeLimit("vietoris_rips: max_dim too large");
  FilteredComplex fc;
  fc.cloud = std::make_shared<const PointCloud>(cloud);
  fc.kind = FiltrationKind::vr;
  auto half = [&](int i, int j) { return 0.5 * distance(cloud.points[i], cloud.points[j], cloud.metric); };
  for (std::size_t i = 0; i < n; ++i) fc.simplices.push_back({Simplex{static_cast<int>(i)}, 0.0});
  if (max_dim >= 1) {
    // Depth-first clique extension in increasing vertex order.
    std::vector<int> stack;
    std::function<void(int, double)> extend = [&](int last, double v) {
      if (static_cast<int>(stack.size()) > max_dim) return;
      for (int w = last + 1; w < static_cast<int>(n); ++w) {
        double nv = v;
        for (int u : stack) nv = std::max(nv, half(u, w));
        if (nv > r_max) continue;
        stack.push_back(w);
        // Simplices entering with a shared longest edge tie exactly; order them
        // by enclosing radius so the choice does not depend on vertex labels.
        double tie = 0.0;
        if (stack.size() >= 3) {
          std::vector<Point> pts;
          for (int u : stack) pts.push_back(cloud.points[u]);
          tie = min_enclosing_ball(pts, cloud.metric).radius;
        }
        fc.simplices.push_back({Simplex(std::span<const int>(stack)), nv, tie});
        extend(w, nv);
        stack.pop_back();
      }
    };
    for (int i = 0; i < static_cast<int>(n); ++i) {
      stack.assign(1, i);
      extend(i, 0.0);
    }
  }
  fc.sort();
  return fc;
}

namespace detail {

inline double circumradius2d(const Point& a, const Point& b, const Point& c) {
  const double bx = b[0] - a[0], by = b[1] - a[1];
  const double cx = c[0] - a[0], cy = c[1] - a[1];
  const double d = 2.0 * (bx * cy - by * cx);
  const double b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
  const double ux = (cy * b2 - by * c2) / d;
  const double uy = (bx * c2 - cx * b2) / d;
  return std::sqrt(ux * ux + uy * uy);
}

}  // namespace detail

/// Planar Alpha filtration (Delaunay-restricted Čech). Simplices valued
/// above r_max are dropped.
inline FilteredComplex alpha_filtration(const PointCloud& cloud, double r_max = kInfinity) {
  const Triangulation tri = delaunay(cloud);
  const auto& P = cloud.points;
  FilteredComplex fc;
  fc.cloud = std::make_shared<const PointCloud>(cloud);
  fc.kind = FiltrationKind::alpha;

  struct EdgeInfo {
    double tri_min = kInfinity;
    bool gabriel = true;
  };
  std::unordered_map<std::uint64_t, EdgeInfo> edges;
  edges.reserve(tri.triangles.size() * 2);
  auto key = [](int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
  };

  for (std::size_t i = 0; i < P.size(); ++i) fc.simplices.push_back({Simplex{static_cast<int>(i)}, 0.0});
  std::vector<double> radius(tri.triangles.size());
  for (std::size_t ti = 0; ti < tri.triangles.size(); ++ti) {
    const auto& t = tri.triangles[ti];
    const double r = radius[ti] = detail::circumradius2d(P[t[0]], P[t[1]], P[t[2]]);
    for (int i = 0; i < 3; ++i) {
      const int a = t[(i + 1) % 3], b = t[(i + 2) % 3], o = t[i];
      auto& e = edges[key(a, b)];
      e.tri_min = std::min(e.tri_min, r);
      // Opposite vertex strictly inside the diametral disk iff the angle at o is obtuse.
      const double dot = (P[a][0] - P[o][0]) * (P[b][0] - P[o][0]) +
                         (P[a][1] - P[o][1]) * (P[b][1] - P[o][1]);
      if (dot < 0) e.gabriel = false;
    }
  }
  std::unordered_map<std::uint64_t, double> edge_value;
  edge_value.reserve(edges.size());
  for (const auto& [k, e] : edges) {
    const int a = static_cast<int>(k >> 32), b = static_cast<int>(k & 0xffffffffu);
    const double half = 0.5 * std::sqrt(detail::squared_distance(P[a], P[b]));
    const double v = e.gabriel ? half : std::max(half, e.tri_min);
    edge_value.emplace(k, v);
    if (v <= r_max) fc.simplices.push_back({Simplex{a, b}, v});
  }
  for (std::size_t ti = 0; ti < tri.triangles.size(); ++ti) {
    const auto& t = tri.triangles[ti];
    // A Gabriel edge of a near-right triangle can round above the circumradius.
    double r = radius[ti];
    for (int i = 0; i < 3; ++i) r = std::max(r, edge_value[key(t[(i + 1) % 3], t[(i + 2) % 3])]);
    if (r <= r_max) fc.simplices.push_back({Simplex{t[0], t[1], t[2]}, r});
  }
  fc.sort();
  return fc;
}

/// Convenience dispatcher used by the CLI and the regime module.
inline FilteredComplex build_filtration(const PointCloud& cloud, FiltrationKind kind, int max_dim,
                                        double r_max) {
  switch (kind) {
    case FiltrationKind::cech: return cech_bruteforce(cloud, max_dim, r_max);
    case FiltrationKind::vr: return vietoris_rips(cloud, max_dim, r_max);
    case FiltrationKind::alpha: return alpha_filtration(cloud, r_max);
  }
  throw InvalidInput("unknown filtration kind");
}

}  // namespace llc
