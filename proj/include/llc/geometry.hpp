#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "llc/errors.hpp"

namespace llc {

enum class MetricKind { euclidean, torus };

/// R^d with the Euclidean norm, or the flat torus [0, period)^d.
struct Metric {
  MetricKind kind = MetricKind::euclidean;
  int dim = 2;
  double period = 1.0;

  static Metric euclidean(int d) { return {MetricKind::euclidean, d, 1.0}; }
  static Metric torus(int d) { return {MetricKind::torus, d, 1.0}; }

  bool is_torus() const { return kind == MetricKind::torus; }
  bool operator==(const Metric&) const = default;
};

using Point = std::vector<double>;

struct Ball {
  Point center;
  double radius = 0.0;
};

/// A finite point set together with the metric it lives in.
struct PointCloud {
  Metric metric;
  std::vector<Point> points;

  PointCloud() = default;
  PointCloud(Metric m, std::vector<Point> pts) : metric(m), points(std::move(pts)) {}

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  int dim() const { return metric.dim; }
  const Point& operator[](std::size_t i) const { return points[i]; }
};

/// Tolerance on squared radii when deciding ball membership.
inline constexpr double kBallTolerance = 1e-12;

namespace detail {

inline void check_dim(const Point& p, int d) {
  if (static_cast<int>(p.size()) != d) {
    throw InvalidInput("point has dimension " + std::to_string(p.size()) +
                       ", metric expects " + std::to_string(d));
  }
}

/// Minimal-image difference of two torus coordinates.
inline double wrap_delta(double delta, double period) {
  return delta - period * std::round(delta / period);
}

inline double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

inline double squared_distance(const Point& p, const Point& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double t = p[i] - q[i];
    s += t * t;
  }
  return s;
}

/// Solves the dense system a x = b in place by Gaussian elimination with
/// partial pivoting. Returns false when a pivot falls below `pivot_tol`.
inline bool solve_linear(std::vector<double>& a, std::vector<double>& b, int n,
                         double pivot_tol) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    }
    if (std::abs(a[piv * n + col]) <= pivot_tol) return false;
    if (piv != col) {
      for (int c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      if (f == 0.0) continue;
      for (int c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a[r * n + c] * b[c];
    b[r] = s / a[r * n + r];
  }
  return true;
}

/// Smallest ball whose boundary passes through every support point, i.e. the
/// circumball within their affine hull. Empty when the support is affinely
/// dependent (relative to `pivot_tol` after scale normalization).
inline std::optional<Ball> affine_circumball(std::span<const Point* const> support,
                                             double pivot_tol = 1e-12) {
  const std::size_t k = support.size();
  if (k == 0) return std::nullopt;
  const Point& p0 = *support[0];
  const std::size_t d = p0.size();
  if (k == 1) return Ball{p0, 0.0};
  if (k == 2) {
    Point c(d);
    for (std::size_t i = 0; i < d; ++i) c[i] = 0.5 * (p0[i] + (*support[1])[i]);
    return Ball{c, 0.5 * std::sqrt(squared_distance(p0, *support[1]))};
  }
  const int m = static_cast<int>(k) - 1;
  std::vector<std::vector<double>> vec(m, std::vector<double>(d));
  double scale = 0.0;
  for (int i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < d; ++j) vec[i][j] = (*support[i + 1])[j] - p0[j];
    scale = std::max(scale, std::sqrt(squared_norm(vec[i])));
  }
  if (scale == 0.0) return std::nullopt;
  for (auto& v : vec) {
    for (double& x : v) x /= scale;
  }
  std::vector<double> gram(static_cast<std::size_t>(m * m));
  std::vector<double> rhs(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < d; ++t) s += vec[i][t] * vec[j][t];
      gram[i * m + j] = 2.0 * s;
    }
    rhs[i] = squared_norm(vec[i]);
  }
  if (!solve_linear(gram, rhs, m, pivot_tol)) return std::nullopt;
  Point c = p0;
  for (int i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < d; ++t) c[t] += scale * rhs[i] * vec[i][t];
  }
  double r2 = 0.0;
  for (std::size_t i = 0; i < k; ++i) r2 = std::max(r2, squared_distance(c, *support[i]));
  return Ball{c, std::sqrt(r2)};
}

inline bool ball_contains(const Ball& b, const Point& p) {
  return squared_distance(b.center, p) <= b.radius * b.radius + kBallTolerance;
}

/// Exhaustive search over supports; only used when move-to-front meets an
/// affinely dependent support.
inline Ball enclosing_ball_exhaustive(std::span<const Point> pts) {
  const std::size_t n = pts.size();
  const std::size_t max_support = std::min(n, pts[0].size() + 1);
  std::optional<Ball> best;
  std::vector<const Point*> support;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) > max_support) continue;
    support.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) support.push_back(&pts[i]);
    }
    auto b = affine_circumball(support);
    if (!b) continue;
    if (best && b->radius >= best->radius) continue;
    bool ok = true;
    for (const Point& p : pts) {
      if (!ball_contains(*b, p)) {
        ok = false;
        break;
      }
    }
    if (ok) best = std::move(b);
  }
  return *best;
}

class MoveToFront {
 public:
  explicit MoveToFront(std::span<const Point> pts) : pts_(pts) {}

  std::optional<Ball> run(std::vector<std::size_t>& order) {
    support_.clear();
    return recurse(order, order.size());
  }

 private:
  std::optional<Ball> recurse(std::vector<std::size_t>& order, std::size_t n) {
    std::optional<Ball> ball;
    if (!support_.empty()) {
      ball = affine_circumball(support_);
      if (!ball) return std::nullopt;
    }
    if (support_.size() == pts_[0].size() + 1) return ball;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = order[i];
      if (ball && ball_contains(*ball, pts_[idx])) continue;
      support_.push_back(&pts_[idx]);
      ball = recurse(order, i);
      support_.pop_back();
      if (!ball) return std::nullopt;
      std::rotate(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(i),
                  order.begin() + static_cast<std::ptrdiff_t>(i) + 1);
    }
    return ball;
  }

  std::span<const Point> pts_;
  std::vector<const Point*> support_;
};

inline Ball euclidean_enclosing_ball(std::span<const Point> pts) {
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937 shuffle_rng(0x5eedu);
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  if (auto b = MoveToFront(pts).run(order)) return *b;
  return enclosing_ball_exhaustive(pts);
}

}  // namespace detail

/// Displacement q - p under the metric (minimal image on the torus).
inline Point displacement(const Point& p, const Point& q, const Metric& m) {
  detail::check_dim(p, m.dim);
  detail::check_dim(q, m.dim);
  Point v(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    v[i] = q[i] - p[i];
    if (m.is_torus()) v[i] = detail::wrap_delta(v[i], m.period);
  }
  return v;
}

inline double distance(const Point& p, const Point& q, const Metric& m) {
  return std::sqrt(detail::squared_norm(displacement(p, q, m)));
}

/// Copies of a torus point set unwrapped around the first point so that
/// Euclidean and toroidal distances agree. Throws NotEmbeddable unless every
/// pairwise distance is below period / 4.
inline std::vector<Point> embed_locally(std::span<const Point> pts, const Metric& m) {
  std::vector<Point> out;
  out.reserve(pts.size());
  for (const Point& p : pts) {
    Point v = displacement(pts[0], p, m);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += pts[0][i];
    out.push_back(std::move(v));
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      if (distance(pts[i], pts[j], m) >= 0.25 * m.period) {
        throw NotEmbeddable("torus points spread beyond a quarter period");
      }
    }
  }
  return out;
}

/// Smallest ball containing all points; its center is z and radius is the
/// Cech filtration value of the simplex spanned by the points.
inline Ball min_enclosing_ball(std::span<const Point> pts, const Metric& m) {
  if (pts.empty()) throw InvalidInput("min_enclosing_ball of an empty set");
  for (const Point& p : pts) detail::check_dim(p, m.dim);
  if (!m.is_torus()) return detail::euclidean_enclosing_ball(pts);
  const auto local = embed_locally(pts, m);
  Ball b = detail::euclidean_enclosing_ball(local);
  for (double& c : b.center) {
    c = std::fmod(c, m.period);
    if (c < 0) c += m.period;
    if (c >= m.period) c = 0.0;
  }
  return b;
}

/// Circumscribed ball of d+1 points in R^d; empty when they are affinely
/// dependent.
inline std::optional<Ball> circumsphere(std::span<const Point> pts) {
  if (pts.empty()) throw InvalidInput("circumsphere needs d+1 points");
  const std::size_t d = pts[0].size();
  if (pts.size() != d + 1) {
    throw InvalidInput("circumsphere needs exactly d+1 = " + std::to_string(d + 1) +
                       " points, got " + std::to_string(pts.size()));
  }
  std::vector<const Point*> support;
  for (const Point& p : pts) {
    if (p.size() != d) throw InvalidInput("circumsphere: mixed dimensions");
    support.push_back(&p);
  }
  return detail::affine_circumball(support);
}

/// Euclidean lift of a torus cloud made of 3^d translated copies, optionally
/// keeping only the copies within `margin` of the central domain.
struct TiledCloud {
  PointCloud lifted;
  std::vector<std::size_t> origin;  // lifted index -> original index
  double period = 1.0;

  /// True when a lifted location lies in the central fundamental domain.
  bool in_central_domain(const Point& p) const {
    for (double c : p) {
      if (c < 0.0 || c >= period) return false;
    }
    return true;
  }
};

inline TiledCloud torus_tile(const PointCloud& cloud, double margin = std::numeric_limits<double>::infinity()) {
  if (!cloud.metric.is_torus()) throw InvalidInput("torus_tile needs a torus cloud");
  const int d = cloud.dim();
  const double per = cloud.metric.period;
  int copies = 1;
  for (int i = 0; i < d; ++i) copies *= 3;
  TiledCloud out;
  out.period = per;
  out.lifted.metric = Metric::euclidean(d);
  out.lifted.points.reserve(cloud.size() * static_cast<std::size_t>(copies));
  out.origin.reserve(out.lifted.points.capacity());
  for (int t = 0; t < copies; ++t) {
    std::vector<int> shift(d);
    int rem = t;
    for (int i = 0; i < d; ++i) {
      shift[i] = rem % 3 - 1;
      rem /= 3;
    }
    for (std::size_t j = 0; j < cloud.size(); ++j) {
      Point p = cloud[j];
      bool keep = true;
      for (int i = 0; i < d; ++i) {
        p[i] += per * shift[i];
        keep = keep && p[i] >= -margin && p[i] < per + margin;
      }
      if (!keep) continue;
      out.lifted.points.push_back(std::move(p));
      out.origin.push_back(j);
    }
  }
  return out;
}

}  // namespace llc
