#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>

#include "errors.hpp"

namespace llc::stats {

inline double mean(const std::vector<double>& x) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Unbiased sample variance.
inline double variance(const std::vector<double>& x) {
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean(x);
  double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

inline double standard_error(const std::vector<double>& x) {
  return std::sqrt(variance(x) / static_cast<double>(x.size()));
}

/// Pearson correlation; nullopt when either sample has zero variance.
inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const double mx = mean(x), my = mean(y);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

/// Ranks 1..n with ties receiving their average rank.
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(ranks(x), ranks(y));
}

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
  double slope_se = 0;
  double intercept_se = 0;
  std::size_t n = 0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LinearFit ols(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("ols: need at least two paired points");
  const double n = static_cast<double>(x.size());
  const double mx = mean(x), my = mean(y);
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0) throw InvalidInput("ols: x has zero variance");
  LinearFit f;
  f.n = x.size();
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - f.intercept - f.slope * x[i];
    sse += e * e;
  }
  f.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
  if (x.size() > 2) {
    const double s2 = sse / (n - 2);
    f.slope_se = std::sqrt(s2 / sxx);
    f.intercept_se = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
  }
  return f;
}

/// Weighted isotonic (nondecreasing) regression by pool-adjacent-violators.
inline std::vector<double> pava(const std::vector<double>& y, std::vector<double> w = {}) {
  const std::size_t n = y.size();
  if (w.empty()) w.assign(n, 1.0);
  if (w.size() != n) throw InvalidInput("pava: weight size mismatch");
  std::vector<double> val, wt;
  std::vector<std::size_t> len;
  for (std::size_t i = 0; i < n; ++i) {
    val.push_back(y[i]);
    wt.push_back(std::max(w[i], 1e-300));
    len.push_back(1);
    while (val.size() > 1 && val[val.size() - 2] > val.back()) {
      const std::size_t b = val.size() - 1;
      const double ww = wt[b - 1] + wt[b];
      val[b - 1] = (val[b - 1] * wt[b - 1] + val[b] * wt[b]) / ww;
      wt[b - 1] = ww;
      len[b - 1] += len[b];
      val.pop_back();
      wt.pop_back();
      len.pop_back();
    }
  }
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t b = 0; b < val.size(); ++b) out.insert(out.end(), len[b], val[b]);
  return out;
}

/// Upper tail of chi-square with `dof` degrees of freedom.
inline double chi_square_sf(double stat, double dof) {
  if (dof <= 0) return std::numeric_limits<double>::quiet_NaN();
  if (stat <= 0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
}

/// Kolmogorov limiting survival function Q(t) = 2 sum (-1)^{k-1} exp(-2 k^2 t^2).
inline double kolmogorov_sf(double t) {
  if (t <= 0) return 1.0;
  if (t < 0.2) return 1.0;
  double s = 0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * t * t);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

struct TestResult {
  double statistic = 0;
  double p_value = 1;
  double dof = 0;
  std::size_t n = 0;
};

/// One-sample Kolmogorov-Smirnov test with Stephens' small-sample correction.
inline TestResult ks_test(std::vector<double> x, const std::function<double(double)>& cdf) {
  if (x.empty()) throw InvalidInput("ks_test: empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d), 0, x.size()};
}

/// Pearson chi-square of observed counts against expected counts, merging
/// adjacent cells until each expected count is at least `min_expected`.
inline TestResult chi_square_gof(const std::vector<double>& observed, const std::vector<double>& expected,
                                 int fitted_params = 0, double min_expected = 5.0) {
  if (observed.size() != expected.size() || observed.empty()) throw InvalidInput("chi_square_gof: size mismatch");
  std::vector<double> o, e;
  double ao = 0, ae = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    ao += observed[i];
    ae += expected[i];
    if (ae >= min_expected) {
      o.push_back(ao);
      e.push_back(ae);
      ao = ae = 0;
    }
  }
  if (ae > 0 || ao > 0) {
    if (e.empty()) {
      o.push_back(ao);
      e.push_back(ae);
    } else {
      o.back() += ao;
      e.back() += ae;
    }
  }
  TestResult r;
  for (std::size_t i = 0; i < o.size(); ++i) r.statistic += (o[i] - e[i]) * (o[i] - e[i]) / e[i];
  r.dof = static_cast<double>(o.size()) - 1 - fitted_params;
  r.p_value = r.dof > 0 ? chi_square_sf(r.statistic, r.dof) : std::numeric_limits<double>::quiet_NaN();
  r.n = static_cast<std::size_t>(std::accumulate(observed.begin(), observed.end(), 0.0));
  return r;
}

/// Chi-square test that integer counts follow Poisson(lambda).
inline TestResult poisson_count_test(const std::vector<long>& counts, double lambda) {
  if (counts.empty()) throw InvalidInput("poisson_count_test: no counts");
  const long top = *std::max_element(counts.begin(), counts.end());
  std::vector<double> obs(top + 2, 0.0), exp(top + 2, 0.0);
  for (long c : counts) obs[c] += 1;
  const boost::math::poisson_distribution<double> pois(std::max(lambda, 1e-300));
  const double n = static_cast<double>(counts.size());
  double acc = 0;
  for (long k = 0; k <= top; ++k) {
    exp[k] = n * boost::math::pdf(pois, static_cast<double>(k));
    acc += exp[k];
  }
  exp[top + 1] = std::max(0.0, n - acc);  // tail beyond the largest observation
  return chi_square_gof(obs, exp);
}

}  // namespace llc::stats
