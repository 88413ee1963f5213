#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "predicates.hpp"

namespace llc {

/// Finite Delaunay triangles, counter-clockwise, indices into the input cloud.
struct Triangulation {
  std::vector<std::array<int, 3>> triangles;
};

namespace detail {

// Incremental Bowyer-Watson with a ghost vertex (kInf) closing the hull.
// Triangles store vertices counter-clockwise; nb[i] is the neighbour across
// the edge opposite v[i].
class DelaunayBuilder {
 public:
  static constexpr int kInf = -1;

  explicit DelaunayBuilder(std::vector<predicates::Vec2> pts) : p_(std::move(pts)) {}

  Triangulation run() {
    const int n = static_cast<int>(p_.size());
    if (n < 3) throw DegenerateInput("delaunay: need at least 3 points");
    check_duplicates();
    std::vector<int> order = hilbert_order();

    // Seed triangle: first two points plus the first non-collinear third.
    const int a = order[0], b = order[1];
    int c = -1;
    std::size_t ci = 0;
    for (std::size_t i = 2; i < order.size(); ++i) {
      if (predicates::orient2d(p_[a], p_[b], p_[order[i]]) != 0) {
        c = order[i];
        ci = i;
        break;
      }
    }
    if (c < 0) throw DegenerateInput("delaunay: all points collinear");
    seed(a, b, c);
    for (std::size_t i = 2; i < order.size(); ++i) {
      if (i != ci) insert(order[i]);
    }

    Triangulation out;
    for (const auto& t : tris_) {
      if (!t.alive) continue;
      if (t.v[0] == kInf || t.v[1] == kInf || t.v[2] == kInf) continue;
      out.triangles.push_back(t.v);
    }
    return out;
  }

 private:
  struct Tri {
    std::array<int, 3> v{};
    std::array<int, 3> nb{-1, -1, -1};
    bool alive = true;
  };

  std::vector<predicates::Vec2> p_;
  std::vector<Tri> tris_;
  std::vector<int> free_;
  std::vector<int> mark_;
  int stamp_ = 0;
  int last_ = 0;

  void check_duplicates() const {
    std::vector<int> idx(p_.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int i, int j) {
      return p_[i].x < p_[j].x || (p_[i].x == p_[j].x && p_[i].y < p_[j].y);
    });
    for (std::size_t i = 1; i < idx.size(); ++i) {
      const auto& u = p_[idx[i - 1]];
      const auto& w = p_[idx[i]];
      if (u.x == w.x && u.y == w.y) throw DegenerateInput("delaunay: duplicate points");
    }
  }

  static std::uint64_t hilbert_index(std::uint32_t x, std::uint32_t y, int bits) {
    const std::uint32_t n = 1u << bits;
    std::uint64_t d = 0;
    for (std::uint32_t s = n >> 1; s > 0; s >>= 1) {
      const std::uint32_t rx = (x & s) ? 1 : 0;
      const std::uint32_t ry = (y & s) ? 1 : 0;
      d += static_cast<std::uint64_t>(s) * s * ((3 * rx) ^ ry);
      if (ry == 0) {
        if (rx == 1) {
          x = n - 1 - x;
          y = n - 1 - y;
        }
        std::swap(x, y);
      }
    }
    return d;
  }

  std::vector<int> hilbert_order() const {
    double lox = p_[0].x, hix = p_[0].x, loy = p_[0].y, hiy = p_[0].y;
    for (const auto& q : p_) {
      lox = std::min(lox, q.x);
      hix = std::max(hix, q.x);
      loy = std::min(loy, q.y);
      hiy = std::max(hiy, q.y);
    }
    const double span = std::max({hix - lox, hiy - loy, 1e-300});
    constexpr int kBits = 16;
    const double scale = static_cast<double>((1u << kBits) - 1) / span;
    std::vector<std::pair<std::uint64_t, int>> keys(p_.size());
    for (std::size_t i = 0; i < p_.size(); ++i) {
      const auto x = static_cast<std::uint32_t>((p_[i].x - lox) * scale);
      const auto y = static_cast<std::uint32_t>((p_[i].y - loy) * scale);
      keys[i] = {hilbert_index(x, y, kBits), static_cast<int>(i)};
    }
    std::sort(keys.begin(), keys.end());
    std::vector<int> order(p_.size());
    for (std::size_t i = 0; i < keys.size(); ++i) order[i] = keys[i].second;
    return order;
  }

  int new_tri(int a, int b, int c) {
    Tri t;
    t.v = {a, b, c};
    if (!free_.empty()) {
      const int id = free_.back();
      free_.pop_back();
      tris_[id] = t;
      mark_[id] = 0;
      return id;
    }
    tris_.push_back(t);
    mark_.push_back(0);
    return static_cast<int>(tris_.size()) - 1;
  }

  static int index_of(const Tri& t, int v) {
    for (int i = 0; i < 3; ++i) {
      if (t.v[i] == v) return i;
    }
    return -1;
  }

  void seed(int a, int b, int c) {
    if (predicates::orient2d(p_[a], p_[b], p_[c]) < 0) std::swap(b, c);
    const int t = new_tri(a, b, c);
    // Ghost across edge (x, y) of t is (y, x, inf).
    const int g0 = new_tri(c, b, kInf);  // opposite a
    const int g1 = new_tri(a, c, kInf);  // opposite b
    const int g2 = new_tri(b, a, kInf);  // opposite c
    tris_[t].nb = {g0, g1, g2};
    // Ghost (y, x, inf): neighbour opposite inf is t, the others are ghosts.
    tris_[g0].nb = {g2, g1, t};
    tris_[g1].nb = {g0, g2, t};
    tris_[g2].nb = {g1, g0, t};
    last_ = t;
  }

  bool is_ghost(int t) const {
    const auto& v = tris_[t].v;
    return v[0] == kInf || v[1] == kInf || v[2] == kInf;
  }

  bool conflicts(int t, int q) const {
    const Tri& tr = tris_[t];
    const int gi = index_of(tr, kInf);
    if (gi < 0) {
      return predicates::incircle_perturbed({p_[tr.v[0]], p_[tr.v[1]], p_[tr.v[2]], p_[q]},
                                            {tr.v[0], tr.v[1], tr.v[2], q}) > 0;
    }
    const int a = tr.v[(gi + 1) % 3], b = tr.v[(gi + 2) % 3];
    const int o = predicates::orient2d(p_[a], p_[b], p_[q]);
    if (o != 0) return o > 0;
    const auto& pa = p_[a];
    const auto& pb = p_[b];
    const auto& pq = p_[q];
    const double d1 = (pq.x - pa.x) * (pb.x - pa.x) + (pq.y - pa.y) * (pb.y - pa.y);
    const double d2 = (pq.x - pb.x) * (pa.x - pb.x) + (pq.y - pb.y) * (pa.y - pb.y);
    return d1 > 0 && d2 > 0;
  }

  // Visibility walk over finite triangles; stops in a ghost when q is outside.
  int locate(int q) {
    int t = last_;
    if (!tris_[t].alive || is_ghost(t)) {
      t = -1;
      for (std::size_t i = 0; i < tris_.size(); ++i) {
        if (tris_[i].alive && !is_ghost(static_cast<int>(i))) {
          t = static_cast<int>(i);
          break;
        }
      }
    }
    int start = 0;
    for (;;) {
      if (is_ghost(t)) return t;
      const Tri& tr = tris_[t];
      bool moved = false;
      for (int k = 0; k < 3; ++k) {
        const int i = (start + k) % 3;
        const int u = tr.v[(i + 1) % 3], w = tr.v[(i + 2) % 3];
        if (predicates::orient2d(p_[u], p_[w], p_[q]) < 0) {
          t = tr.nb[i];
          moved = true;
          break;
        }
      }
      if (!moved) return t;
      start = (start + 1) % 3;
    }
  }

  void insert(int q) {
    const int t0 = locate(q);
    ++stamp_;
    std::vector<int> cavity{t0};
    mark_[t0] = stamp_;
    struct Boundary {
      int u, w, outside;
    };
    std::vector<Boundary> boundary;
    for (std::size_t head = 0; head < cavity.size(); ++head) {
      const int t = cavity[head];
      for (int i = 0; i < 3; ++i) {
        const int nbt = tris_[t].nb[i];
        const int u = tris_[t].v[(i + 1) % 3], w = tris_[t].v[(i + 2) % 3];
        if (mark_[nbt] == stamp_) continue;
        if (mark_[nbt] != -stamp_ && conflicts(nbt, q)) {
          mark_[nbt] = stamp_;
          cavity.push_back(nbt);
        } else {
          mark_[nbt] = -stamp_;
          boundary.push_back({u, w, nbt});
        }
      }
    }
    // An edge recorded as boundary may later have had its outside triangle
    // join the cavity; those are interior edges and are dropped.
    std::vector<Boundary> rim;
    rim.reserve(boundary.size());
    for (const auto& e : boundary) {
      if (mark_[e.outside] != stamp_) rim.push_back(e);
    }
    for (int t : cavity) {
      tris_[t].alive = false;
      free_.push_back(t);
    }
    std::vector<int> created(rim.size());
    std::unordered_map<int, int> by_first;
    by_first.reserve(rim.size() * 2);
    for (std::size_t i = 0; i < rim.size(); ++i) {
      const auto& e = rim[i];
      const int nt = new_tri(e.u, e.w, q);
      created[i] = nt;
      tris_[nt].nb[2] = e.outside;
      Tri& out = tris_[e.outside];
      for (int j = 0; j < 3; ++j) {
        const int a = out.v[(j + 1) % 3], b = out.v[(j + 2) % 3];
        if (a == e.w && b == e.u) out.nb[j] = nt;
      }
      by_first[e.u] = nt;
    }
    for (std::size_t i = 0; i < rim.size(); ++i) {
      const int nt = created[i];
      // Edge (w, q) is opposite u: shared with the new triangle starting at w.
      tris_[nt].nb[0] = by_first.at(rim[i].w);
      // Edge (q, u) is opposite w: shared with the triangle whose w equals u.
      const int other = tris_[nt].nb[0];
      tris_[other].nb[1] = nt;
      if (!is_ghost(nt)) last_ = nt;
    }
  }
};

}  // namespace detail

/// Delaunay triangulation of a planar Euclidean cloud. Cocircular ties are
/// resolved by symbolic perturbation on point index, so the output is a
/// deterministic function of the input.
inline Triangulation delaunay(const PointCloud& cloud) {
  if (cloud.metric.dim != 2 || cloud.metric.is_torus()) {
    throw InvalidInput("delaunay: requires a 2D Euclidean cloud");
  }
  std::vector<predicates::Vec2> pts;
  pts.reserve(cloud.size());
  for (const auto& p : cloud.points) {
    detail::check_dim(p, 2);
    pts.push_back({p[0], p[1]});
  }
  return detail::DelaunayBuilder(std::move(pts)).run();
}

}  // namespace llc
