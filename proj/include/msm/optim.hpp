#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace msm {

struct OptimOptions {
  std::size_t max_iter = 500;
  double tol = 1e-8;        // relative objective change
  double grad_tol = 1e-9;   // infinity norm of the gradient
  std::size_t memory = 8;
  std::size_t max_line_steps = 50;
};

struct OptimResult {
  std::vector<double> x;
  double value = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

/// Central-difference gradient with per-coordinate steps scaled by cbrt(eps).
inline void numeric_gradient(const Objective& f, std::span<const double> x,
                             std::span<double> g) {
  static constexpr double kStep = 6.0554544523933429e-6;
  std::vector<double> xt(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = kStep * (1.0 + std::abs(x[i]));
    xt[i] = x[i] + h;
    const double fp = f(xt);
    xt[i] = x[i] - h;
    const double fm = f(xt);
    xt[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double inf_norm(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace detail

/// Limited-memory BFGS with Armijo backtracking. Minimizes f from x0 and
/// returns the best iterate seen; `converged` reflects the stopping test,
/// a line-search dead end leaves it false.
inline OptimResult lbfgs_minimize(const Objective& f, std::vector<double> x0,
                                  const OptimOptions& opts = {}) {
  const std::size_t n = x0.size();
  OptimResult res;
  std::vector<double> x = std::move(x0);
  std::vector<double> g(n), xn(n), gn(n), d(n);
  double fx = f(x);
  res.x = x;
  res.value = fx;
  if (!std::isfinite(fx)) return res;
  numeric_gradient(f, x, g);

  std::vector<std::vector<double>> s_hist, y_hist;
  std::vector<double> rho_hist;
  std::vector<double> alpha(opts.memory);
  bool fresh = true;  // no curvature pairs yet

  for (std::size_t iter = 1; iter <= opts.max_iter; ++iter) {
    res.iterations = iter;

    // two-loop recursion for d = -H*g
    std::copy(g.begin(), g.end(), d.begin());
    const std::size_t m = s_hist.size();
    for (std::size_t i = m; i-- > 0;) {
      alpha[i] = rho_hist[i] * detail::dot(s_hist[i], d);
      for (std::size_t k = 0; k < n; ++k) d[k] -= alpha[i] * y_hist[i][k];
    }
    if (m > 0) {
      const double yy = detail::dot(y_hist[m - 1], y_hist[m - 1]);
      const double gamma = yy > 0.0 ? 1.0 / (rho_hist[m - 1] * yy) : 1.0;
      for (auto& v : d) v *= gamma;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * detail::dot(y_hist[i], d);
      for (std::size_t k = 0; k < n; ++k) d[k] += (alpha[i] - beta) * s_hist[i][k];
    }
    for (auto& v : d) v = -v;

    double gd = detail::dot(g, d);
    if (!(gd < 0.0)) {  // not a descent direction, fall back to steepest descent
      for (std::size_t k = 0; k < n; ++k) d[k] = -g[k];
      gd = -detail::dot(g, g);
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      fresh = true;
    }

    double step = fresh ? 1.0 / std::max(1.0, detail::inf_norm(g)) : 1.0;
    double fn = fx;
    bool accepted = false;
    for (std::size_t ls = 0; ls < opts.max_line_steps; ++ls) {
      for (std::size_t k = 0; k < n; ++k) xn[k] = x[k] + step * d[k];
      fn = f(xn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * step * gd) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (fresh) break;  // stuck even on steepest descent
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      fresh = true;
      continue;
    }

    numeric_gradient(f, xn, gn);
    std::vector<double> s(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
      s[k] = xn[k] - x[k];
      y[k] = gn[k] - g[k];
    }
    const double ys = detail::dot(y, s);
    const double ynorm = std::sqrt(detail::dot(y, y));
    const double snorm = std::sqrt(detail::dot(s, s));
    if (ys > 1e-12 * ynorm * snorm) {
      if (s_hist.size() == opts.memory) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / ys);
      fresh = false;
    }

    const double prev = fx;
    x.swap(xn);
    g.swap(gn);
    fx = fn;
    if (fx < res.value) {
      res.value = fx;
      res.x = x;
    }
    if (std::abs(prev - fx) <= opts.tol * (std::abs(prev) + 1e-12)) {
      res.converged = true;
      break;
    }
    if (detail::inf_norm(g) <= opts.grad_tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace msm
