#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <boost/multiprecision/cpp_int.hpp>

namespace llc::predicates {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

namespace detail {

using Exact = boost::multiprecision::cpp_rational;

inline int sign_of(const Exact& v) { return v.sign(); }

inline int orient_exact(Vec2 a, Vec2 b, Vec2 c) {
  const Exact ax(a.x), ay(a.y), bx(b.x), by(b.y), cx(c.x), cy(c.y);
  return sign_of((ax - cx) * (by - cy) - (ay - cy) * (bx - cx));
}

inline Exact lifted(const Exact& x, const Exact& y) { return x * x + y * y; }

/// Exact 4x4 determinant of rows (x, y, x^2 + y^2, 1).
inline int incircle_exact(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const Exact adx = Exact(a.x) - Exact(d.x), ady = Exact(a.y) - Exact(d.y);
  const Exact bdx = Exact(b.x) - Exact(d.x), bdy = Exact(b.y) - Exact(d.y);
  const Exact cdx = Exact(c.x) - Exact(d.x), cdy = Exact(c.y) - Exact(d.y);
  const Exact alift = lifted(adx, ady), blift = lifted(bdx, bdy), clift = lifted(cdx, cdy);
  const Exact det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
                    clift * (adx * bdy - bdx * ady);
  return sign_of(det);
}

}  // namespace detail

/// Sign of the signed area of (a, b, c): +1 counter-clockwise, -1 clockwise,
/// 0 collinear. Exact for all double inputs.
inline int orient2d(Vec2 a, Vec2 b, Vec2 c) {
  const double detleft = (a.x - c.x) * (b.y - c.y);
  const double detright = (a.y - c.y) * (b.x - c.x);
  const double det = detleft - detright;
  const double bound = 3.3306690738754716e-16 * (std::abs(detleft) + std::abs(detright));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return detail::orient_exact(a, b, c);
}

/// +1 when d lies strictly inside the circle through counter-clockwise
/// (a, b, c), -1 outside, 0 cocircular. Exact for all double inputs.
inline int incircle(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) +
                     clift * (adxbdy - bdxady);
  const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                           (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                           (std::abs(adxbdy) + std::abs(bdxady)) * clift;
  const double bound = 1.1102230246251577e-15 * permanent;
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return detail::incircle_exact(a, b, c, d);
}

/// incircle with a symbolic perturbation that never returns 0 for four
/// distinct points. Each point's lifted height is raised by eps^(rank), the
/// smallest index receiving the dominant perturbation; cocircular ties are
/// therefore broken consistently, as in a regular triangulation with
/// infinitesimal index-ordered weights.
inline int incircle_perturbed(std::array<Vec2, 4> p, std::array<int, 4> idx) {
  const int s = incircle(p[0], p[1], p[2], p[3]);
  if (s != 0) return s;
  // Raising the lift of row r changes det(x, y, w, 1) by its cofactor,
  // (-1)^r times orient of the remaining rows.
  std::array<int, 4> rows{0, 1, 2, 3};
  std::sort(rows.begin(), rows.end(), [&](int a, int b) { return idx[a] < idx[b]; });
  for (int r : rows) {
    std::array<Vec2, 3> rest{};
    int k = 0;
    for (int j = 0; j < 4; ++j) {
      if (j != r) rest[k++] = p[j];
    }
    const int o = orient2d(rest[0], rest[1], rest[2]);
    if (o == 0) continue;
    return (r % 2 == 0) ? o : -o;
  }
  return 0;
}

}  // namespace llc::predicates
