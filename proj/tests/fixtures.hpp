#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "llc/geometry.hpp"

namespace llc::fixtures {

// The six-point "fish": a triangle on the left glued to a diamond on the right.
inline PointCloud fish(double scale = 1.0) {
  const double h = std::sqrt(3.0) / 2.0;
  PointCloud c{Metric::euclidean(2), {{-1.5, h}, {-1.5, -h}, {0, 0}, {1, 1}, {1, -1}, {2, 0}}};
  for (auto& p : c.points) {
    for (double& x : p) x *= scale;
  }
  return c;
}

inline PointCloud uniform_square(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointCloud c{Metric::euclidean(2), {}};
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({u(rng), u(rng)});
  return c;
}

}  // namespace llc::fixtures
