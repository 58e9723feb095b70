#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "msm/series.hpp"

namespace msm {

/// Window weight rule. Weights are indexed chronologically: j = 1 is the
/// oldest observation of the window, j = n the newest; every scheme produces
/// a nonnegative nondecreasing sequence.
struct WeightScheme {
  enum class Kind { uniform, exponential, linear, calibrated };

  Kind kind = Kind::uniform;
  double p = 0.0;           // exponential memory, in [0, 1)
  double alpha_hat = 1.0;   // calibrated exponent
  std::size_t calib_m = 0;  // calibration depth when parsed from config
  bool normalize = true;

  static WeightScheme uniform_scheme() { return {}; }
  static WeightScheme exponential(double p, bool normalize = true) {
    WeightScheme s;
    s.kind = Kind::exponential;
    s.p = p;
    s.normalize = normalize;
    return s;
  }
  static WeightScheme linear(bool normalize = true) {
    WeightScheme s;
    s.kind = Kind::linear;
    s.normalize = normalize;
    return s;
  }
  static WeightScheme calibrated(double alpha_hat, bool normalize = true) {
    WeightScheme s;
    s.kind = Kind::calibrated;
    s.alpha_hat = alpha_hat;
    s.normalize = normalize;
    return s;
  }

  bool is_uniform() const {
    return kind == Kind::uniform || (kind == Kind::exponential && p == 0.0) ||
           (kind == Kind::calibrated && alpha_hat == 0.0);
  }
};

inline std::vector<double> weights(const WeightScheme& scheme, std::size_t n) {
  if (n < 1) throw std::invalid_argument("weights: n must be >= 1");
  std::vector<double> w(n);
  const double dn = static_cast<double>(n);
  switch (scheme.kind) {
    case WeightScheme::Kind::uniform: {
      std::fill(w.begin(), w.end(), scheme.normalize ? 1.0 / dn : 1.0);
      break;
    }
    case WeightScheme::Kind::exponential: {
      const double p = scheme.p;
      if (!(p >= 0.0 && p < 1.0))
        throw std::invalid_argument("exponential weighting requires p in [0,1)");
      if (scheme.normalize) {
        // closed form keeps the sum exactly 1 up to round-off
        const double denom = dn - p * (dn + 1.0 - std::pow(p, dn));
        for (std::size_t j = 1; j <= n; ++j)
          w[j - 1] = (1.0 - p) * (1.0 - std::pow(p, static_cast<double>(j))) / denom;
      } else {
        for (std::size_t j = 1; j <= n; ++j)
          w[j - 1] = 1.0 - std::pow(p, static_cast<double>(j));
      }
      break;
    }
    case WeightScheme::Kind::linear: {
      for (std::size_t j = 1; j <= n; ++j)
        w[j - 1] = scheme.normalize ? 2.0 * static_cast<double>(j) / (dn * (dn + 1.0))
                                    : static_cast<double>(j);
      break;
    }
    case WeightScheme::Kind::calibrated: {
      // observation at distance d = n-j+1 from the prediction point gets
      // d^(-alpha); negative exponents would break monotonicity, clamp at 0
      const double a = std::max(scheme.alpha_hat, 0.0);
      double sum = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double d = static_cast<double>(n - j + 1);
        w[j - 1] = std::pow(d, -a);
        sum += w[j - 1];
      }
      if (scheme.normalize)
        for (auto& v : w) v /= sum;
      break;
    }
  }
  return w;
}

struct CalibrationResult {
  double alpha_hat = 0.0;
  double c_hat = 1.0;
  std::vector<double> s_squared;  // mean squared i-step increments, i = 1..m
};

/// Least squares fit of log s2_i = log c + alpha * log i.
inline CalibrationResult calibrate_from_s2(const std::vector<double>& s2) {
  if (s2.size() < 2) throw std::invalid_argument("calibration needs at least two lags");
  const std::size_t m = s2.size();
  double sx = 0.0, sy = 0.0;
  std::vector<double> xs(m), ys(m);
  for (std::size_t i = 1; i <= m; ++i) {
    if (!(s2[i - 1] > 0.0))
      throw std::runtime_error("calibration: mean squared increment is zero at lag " +
                               std::to_string(i));
    xs[i - 1] = std::log(static_cast<double>(i));
    ys[i - 1] = std::log(s2[i - 1]);
    sx += xs[i - 1];
    sy += ys[i - 1];
  }
  const double xbar = sx / static_cast<double>(m);
  const double ybar = sy / static_cast<double>(m);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxy += (xs[i] - xbar) * (ys[i] - ybar);
    sxx += (xs[i] - xbar) * (xs[i] - xbar);
  }
  CalibrationResult res;
  res.alpha_hat = sxy / sxx;
  res.c_hat = std::exp(ybar - res.alpha_hat * xbar);
  res.s_squared = s2;
  return res;
}

/// Mean squared i-step increments over all admissible start points,
/// i = 1..m, then the log-log regression above.
inline CalibrationResult calibrate(const TimeSeries& series, std::size_t m) {
  const std::size_t n = series.size();
  if (m < 2 || 2 * m > n)
    throw std::invalid_argument("calibration depth must satisfy 2 <= m <= length/2");
  std::vector<double> s2(m, 0.0);
  for (std::size_t lag = 1; lag <= m; ++lag) {
    double acc = 0.0;
    for (std::size_t j = 0; j + lag < n; ++j) {
      const double d = series.values[j + lag] - series.values[j];
      acc += d * d;
    }
    s2[lag - 1] = acc / static_cast<double>(n - lag);
  }
  return calibrate_from_s2(s2);
}

inline std::string to_string(const WeightScheme& s) {
  switch (s.kind) {
    case WeightScheme::Kind::uniform: return "uniform";
    case WeightScheme::Kind::exponential: {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "exp:%g", s.p);
      return buf;
    }
    case WeightScheme::Kind::linear: return "linear";
    case WeightScheme::Kind::calibrated: {
      if (s.calib_m > 0) return "calibrated:" + std::to_string(s.calib_m);
      char buf[48];
      std::snprintf(buf, sizeof(buf), "calibrated:a=%g", s.alpha_hat);
      return buf;
    }
  }
  return "uniform";
}

/// Parses `uniform | exp:<p> | linear | calibrated:<m>`. A calibrated scheme
/// still needs its exponent resolved against a series via calibrate().
inline WeightScheme parse_weight_scheme(const std::string& text) {
  if (text == "uniform" || text.empty()) return WeightScheme::uniform_scheme();
  if (text == "linear") return WeightScheme::linear();
  if (text.rfind("exp:", 0) == 0) {
    const double p = std::stod(text.substr(4));
    return WeightScheme::exponential(p);
  }
  if (text.rfind("calibrated:", 0) == 0) {
    WeightScheme s = WeightScheme::calibrated(1.0);
    const std::string arg = text.substr(11);
    if (arg.rfind("a=", 0) == 0) {
      s.alpha_hat = std::stod(arg.substr(2));
    } else {
      s.calib_m = std::stoul(arg);
    }
    return s;
  }
  throw std::invalid_argument("unknown weighting scheme: " + text);
}

/// Fills in alpha_hat for schemes parsed as `calibrated:<m>`.
inline WeightScheme resolve_weight_scheme(WeightScheme scheme, const TimeSeries& series) {
  if (scheme.kind == WeightScheme::Kind::calibrated && scheme.calib_m > 0)
    scheme.alpha_hat = calibrate(series, scheme.calib_m).alpha_hat;
  return scheme;
}

}  // namespace msm
