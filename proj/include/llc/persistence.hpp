#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <locale>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "delaunay.hpp"
#include "errors.hpp"
#include "filtration.hpp"
#include "geometry.hpp"
#include "predicates.hpp"
#include "union_find.hpp"

namespace llc {

struct PersistencePair {
  int dim = 0;  // homology dimension = dimension of the birth simplex
  std::size_t birth = 0;
  std::size_t death = 0;
};

struct PersistencePairing {
  std::vector<PersistencePair> pairs;  // ordered by death index
  std::vector<std::size_t> essential;  // ordered by index

  std::size_t count(int dim) const {
    return static_cast<std::size_t>(
        std::count_if(pairs.begin(), pairs.end(), [&](const auto& p) { return p.dim == dim; }));
  }
};

struct ReduceOptions {
  bool clearing = false;
};

namespace detail {

inline void add_columns(std::vector<std::size_t>& acc, const std::vector<std::size_t>& other,
                        std::vector<std::size_t>& tmp) {
  tmp.clear();
  std::set_symmetric_difference(acc.begin(), acc.end(), other.begin(), other.end(),
                                std::back_inserter(tmp));
  acc.swap(tmp);
}

}  // namespace detail

/// Standard Z/2 column reduction. The complex must be sorted in the
/// canonical order and closed under faces.
inline PersistencePairing reduce(const FilteredComplex& fc, ReduceOptions opt = {}) {
  const std::size_t n = fc.size();
  PersistencePairing out;
  if (n == 0) return out;
  if (!fc.is_sorted()) throw InvalidInput("reduce: complex not in canonical order");

  std::unordered_map<Simplex, std::size_t, SimplexHash> index;
  index.reserve(n * 2);
  int max_dim = 0;
  for (std::size_t i = 0; i < n; ++i) {
    index.emplace(fc[i].simplex, i);
    max_dim = std::max(max_dim, fc[i].simplex.dim());
  }

  auto boundary = [&](std::size_t j) {
    std::vector<std::size_t> col;
    const Simplex& s = fc[j].simplex;
    if (s.size() < 2) return col;
    col.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto it = index.find(s.facet(i));
      if (it == index.end() || it->second >= j) {
        throw InvalidInput("reduce: complex is not a filtration (missing or late face)");
      }
      col.push_back(it->second);
    }
    std::sort(col.begin(), col.end());
    return col;
  };

  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> pivot_col(n, kNone);  // low -> column
  std::vector<std::vector<std::size_t>> reduced(n);
  std::vector<char> cleared(n, 0);
  std::vector<std::size_t> tmp;

  auto reduce_column = [&](std::size_t j) {
    std::vector<std::size_t> col = boundary(j);
    while (!col.empty() && pivot_col[col.back()] != kNone) {
      detail::add_columns(col, reduced[pivot_col[col.back()]], tmp);
    }
    if (!col.empty()) {
      pivot_col[col.back()] = j;
      reduced[j] = std::move(col);
    }
  };

  if (opt.clearing) {
    std::vector<std::vector<std::size_t>> by_dim(max_dim + 1);
    for (std::size_t j = 0; j < n; ++j) by_dim[fc[j].simplex.dim()].push_back(j);
    for (int d = max_dim; d >= 1; --d) {
      for (std::size_t j : by_dim[d]) {
        if (cleared[j]) continue;
        reduce_column(j);
        if (!reduced[j].empty()) cleared[reduced[j].back()] = 1;
      }
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) reduce_column(j);
  }

  std::vector<char> paired(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    if (reduced[j].empty()) continue;
    const std::size_t low = reduced[j].back();
    out.pairs.push_back({fc[low].simplex.dim(), low, j});
    paired[low] = paired[j] = 1;
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!paired[j]) out.essential.push_back(j);
  }
  return out;
}

struct FeatureRecord {
  int dim = 1;
  double birth = 0.0;
  double death = 0.0;
  double life_add = 0.0;
  double life_mult = 0.0;  // +inf when birth == 0
  Point center;
  Simplex birth_simplex;
  Simplex death_simplex;
  std::size_t birth_index = 0;
  std::size_t death_index = 0;
  bool flagged = false;  // set when loop extraction hit a tie or degeneracy
};

/// Off-diagonal finite pairs of dimension p as feature records. Pairs with
/// birth == death carry no lifetime and are skipped.
inline std::vector<FeatureRecord> features(const PersistencePairing& pairing,
                                           const FilteredComplex& fc, int p) {
  if (p < 1) throw InvalidInput("features: dimension must be at least 1");
  std::vector<FeatureRecord> out;
  std::vector<Point> pts;
  for (const auto& pr : pairing.pairs) {
    if (pr.dim != p) continue;
    const double b = fc[pr.birth].value, r = fc[pr.death].value;
    if (!(r > b)) continue;
    FeatureRecord f;
    f.dim = p;
    f.birth = b;
    f.death = r;
    f.life_add = r - b;
    f.life_mult = b > 0 ? r / b : kInfinity;
    f.birth_simplex = fc[pr.birth].simplex;
    f.death_simplex = fc[pr.death].simplex;
    f.birth_index = pr.birth;
    f.death_index = pr.death;
    pts.clear();
    for (int v : f.death_simplex) pts.push_back(fc.cloud->points[v]);
    f.center = min_enclosing_ball(pts, fc.cloud->metric).center;
    out.push_back(std::move(f));
  }
  return out;
}

/// Persistence diagram of dimension p as (birth, death) values, off-diagonal only.
inline std::vector<std::pair<double, double>> diagram(const PersistencePairing& pairing,
                                                      const FilteredComplex& fc, int p) {
  std::vector<std::pair<double, double>> out;
  for (const auto& pr : pairing.pairs) {
    if (pr.dim != p) continue;
    const double b = fc[pr.birth].value, r = fc[pr.death].value;
    if (r > b) out.emplace_back(b, r);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Bottleneck distance between two finite diagrams (L-infinity ground
/// metric, points may match the diagonal). Exact: binary search over the
/// candidate costs with a bipartite matching test; meant for small diagrams.
inline double bottleneck_distance(const std::vector<std::pair<double, double>>& a,
                                  const std::vector<std::pair<double, double>>& b) {
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  if (n == 0) return 0.0;
  // Left: a_0..a_{na-1}, then diagonal copies of b. Right: b_0..b_{nb-1}, then diagonal copies of a.
  auto cost = [&](std::size_t i, std::size_t j) -> double {
    if (i < na && j < nb) return std::max(std::abs(a[i].first - b[j].first), std::abs(a[i].second - b[j].second));
    if (i < na) return j - nb == i ? (a[i].second - a[i].first) / 2 : kInfinity;
    if (j < nb) return i - na == j ? (b[j].second - b[j].first) / 2 : kInfinity;
    return 0.0;
  };
  std::vector<double> cand{0.0};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (const double c = cost(i, j); std::isfinite(c)) cand.push_back(c);
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

  std::vector<long> match(n);
  std::vector<char> seen(n);
  auto perfect = [&](double eps) {
    std::fill(match.begin(), match.end(), -1);
    std::function<bool(std::size_t)> augment = [&](std::size_t i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (seen[j] || cost(i, j) > eps) continue;
        seen[j] = 1;
        if (match[j] < 0 || augment(static_cast<std::size_t>(match[j]))) {
          match[j] = static_cast<long>(i);
          return true;
        }
      }
      return false;
    };
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(seen.begin(), seen.end(), 0);
      if (!augment(i)) return false;
    }
    return true;
  };
  std::size_t lo = 0, hi = cand.size() - 1;  // the largest candidate always admits a matching
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (perfect(cand[mid])) hi = mid;
    else lo = mid + 1;
  }
  return cand[lo];
}

/// CSV `dim,birth,death,life_add,life_mult,center_x,center_y,...`.
inline void write_diagram_csv(std::ostream& os, const std::vector<FeatureRecord>& feats, int d) {
  static const char* names[] = {"x", "y", "z", "w"};
  std::ostringstream s;
  s.imbue(std::locale::classic());
  s << std::setprecision(17);
  s << "dim,birth,death,life_add,life_mult";
  for (int i = 0; i < d; ++i) {
    if (i < 4) s << ",center_" << names[i];
    else s << ",center_" << i;
  }
  s << '\n';
  for (const auto& f : feats) {
    s << f.dim << ',' << f.birth << ',' << f.death << ',' << f.life_add << ',';
    if (std::isinf(f.life_mult)) s << "inf";
    else s << f.life_mult;
    for (double c : f.center) s << ',' << c;
    s << '\n';
  }
  os << s.str();
}

namespace detail {

inline bool strictly_inside_triangle(const Point& a, const Point& b, const Point& c, const Point& z) {
  using predicates::Vec2;
  const Vec2 A{a[0], a[1]}, B{b[0], b[1]}, C{c[0], c[1]}, Z{z[0], z[1]};
  const int o = predicates::orient2d(A, B, C);
  if (o == 0) return false;
  return predicates::orient2d(A, B, Z) == o && predicates::orient2d(B, C, Z) == o &&
         predicates::orient2d(C, A, Z) == o;
}

}  // namespace detail

/// A planar triangle is negative in the Čech/Alpha filtration iff its open
/// circumdisk holds no cloud point and its circumcenter lies strictly inside it.
inline bool negative_check_2d(const Simplex& tri, const PointCloud& cloud) {
  if (tri.size() != 3 || cloud.dim() != 2) throw InvalidInput("negative_check_2d: needs a planar triangle");
  const Point& a = cloud[tri[0]];
  const Point& b = cloud[tri[1]];
  const Point& c = cloud[tri[2]];
  const std::array<Point, 3> abc{a, b, c};
  const auto ball = circumsphere(abc);
  if (!ball) return false;
  if (!detail::strictly_inside_triangle(a, b, c, ball->center)) return false;
  const double r = ball->radius;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (static_cast<int>(i) == tri[0] || static_cast<int>(i) == tri[1] || static_cast<int>(i) == tri[2]) {
      continue;
    }
    if (std::sqrt(detail::squared_distance(cloud[i], ball->center)) < r - 1e-10) return false;
  }
  return true;
}

/// Ordered vertex loop bounding the region that the feature's death
/// triangle fills. Works on a planar Alpha complex.
///
/// Delaunay triangles are flood-filled from the death triangle across edges
/// that are absent from the 1-skeleton at the birthtime (restricted to the
/// birth edge's component); the positively oriented boundary cycle of the
/// filled region is returned.
inline std::vector<int> associated_loop(FeatureRecord& fr, const FilteredComplex& fc) {
  if (fc.kind != FiltrationKind::alpha) throw InvalidInput("associated_loop: needs an Alpha complex");
  if (fr.dim != 1 || fr.death_simplex.size() != 3) throw InvalidInput("associated_loop: needs an H1 feature");
  const PointCloud& cloud = *fc.cloud;
  const auto& P = cloud.points;
  auto key = [](int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
  };

  // 1-skeleton at the birthtime, and the birth edge's component in it.
  UnionFind uf(cloud.size());
  std::vector<std::uint64_t> skeleton;
  bool tie = false;
  for (const auto& fs : fc.simplices) {
    if (fs.simplex.size() != 2) continue;
    if (fs.value > fr.birth) continue;
    if (fs.value == fr.birth && !(fs.simplex == fr.birth_simplex)) tie = true;
    skeleton.push_back(key(fs.simplex[0], fs.simplex[1]));
    uf.merge(fs.simplex[0], fs.simplex[1]);
  }
  if (tie) fr.flagged = true;
  const std::size_t root = uf.find(fr.birth_simplex[0]);
  std::unordered_set<std::uint64_t> walls;
  for (std::uint64_t e : skeleton) {
    if (uf.find(static_cast<std::size_t>(e >> 32)) == root) walls.insert(e);
  }

  const Triangulation tri = delaunay(cloud);
  const std::size_t T = tri.triangles.size();
  std::unordered_map<std::uint64_t, std::array<int, 2>> edge_tris;
  edge_tris.reserve(T * 2);
  int start = -1;
  for (std::size_t t = 0; t < T; ++t) {
    const auto& v = tri.triangles[t];
    Simplex s{v[0], v[1], v[2]};
    if (s == fr.death_simplex) start = static_cast<int>(t);
    for (int i = 0; i < 3; ++i) {
      auto [it, fresh] = edge_tris.try_emplace(key(v[(i + 1) % 3], v[(i + 2) % 3]), std::array<int, 2>{-1, -1});
      auto& slot = it->second;
      (slot[0] < 0 ? slot[0] : slot[1]) = static_cast<int>(t);
    }
  }
  if (start < 0) {
    fr.flagged = true;
    throw LoopExtractionError("associated_loop: death triangle is not a Delaunay triangle");
  }

  std::vector<char> in_region(T, 0);
  std::vector<int> queue{start};
  in_region[start] = 1;
  for (std::size_t h = 0; h < queue.size(); ++h) {
    const auto& v = tri.triangles[queue[h]];
    for (int i = 0; i < 3; ++i) {
      const std::uint64_t e = key(v[(i + 1) % 3], v[(i + 2) % 3]);
      if (walls.count(e)) continue;
      const auto& adj = edge_tris.at(e);
      const int other = adj[0] == queue[h] ? adj[1] : adj[0];
      if (other < 0) {
        fr.flagged = true;
        throw LoopExtractionError("associated_loop: region escapes the convex hull");
      }
      if (!in_region[other]) {
        in_region[other] = 1;
        queue.push_back(other);
      }
    }
  }

  // Directed boundary edges with the region on their left.
  std::unordered_map<int, std::vector<int>> out_edges;
  std::size_t n_edges = 0;
  for (std::size_t t = 0; t < T; ++t) {
    if (!in_region[t]) continue;
    const auto& v = tri.triangles[t];
    for (int i = 0; i < 3; ++i) {
      const int a = v[(i + 1) % 3], b = v[(i + 2) % 3];
      const auto& adj = edge_tris.at(key(a, b));
      const int other = adj[0] == static_cast<int>(t) ? adj[1] : adj[0];
      if (other >= 0 && in_region[other]) continue;
      out_edges[a].push_back(b);
      ++n_edges;
    }
  }

  // Trace every boundary cycle, turning tightest towards the region.
  std::unordered_set<std::uint64_t> used;
  auto dkey = [](int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
  };
  std::vector<int> best;
  double best_area = 0.0;
  std::vector<std::pair<int, int>> order;
  for (const auto& [a, outs] : out_edges) {
    for (int b : outs) order.emplace_back(a, b);
  }
  std::sort(order.begin(), order.end());
  for (const auto& [a0, b0] : order) {
    if (used.count(dkey(a0, b0))) continue;
    std::vector<int> loop{a0};
    int u = a0, v = b0;
    used.insert(dkey(u, v));
    for (std::size_t steps = 0; steps <= n_edges; ++steps) {
      if (v == a0) break;
      loop.push_back(v);
      const auto& cands = out_edges[v];
      const double back = std::atan2(P[u][1] - P[v][1], P[u][0] - P[v][0]);
      int next = -1;
      double best_turn = 10.0;
      for (int w : cands) {
        if (used.count(dkey(v, w))) continue;
        double turn = back - std::atan2(P[w][1] - P[v][1], P[w][0] - P[v][0]);
        while (turn <= 0) turn += 2 * std::numbers::pi;
        while (turn > 2 * std::numbers::pi) turn -= 2 * std::numbers::pi;
        if (turn < best_turn) {
          best_turn = turn;
          next = w;
        }
      }
      if (next < 0) break;
      used.insert(dkey(v, next));
      u = v;
      v = next;
    }
    if (v != a0) continue;
    double area = 0.0;
    for (std::size_t i = 0; i < loop.size(); ++i) {
      const auto& p = P[loop[i]];
      const auto& q = P[loop[(i + 1) % loop.size()]];
      area += p[0] * q[1] - p[1] * q[0];
    }
    if (area > best_area) {
      best_area = area;
      best = loop;
    }
  }
  if (best.size() < 3) {
    fr.flagged = true;
    throw LoopExtractionError("associated_loop: no positively oriented boundary cycle");
  }
  return best;
}

}  // namespace llc
