#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace msm {

enum class KernelFamily { normal, student, logistic };

inline std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::normal: return "normal";
    case KernelFamily::student: return "student";
    case KernelFamily::logistic: return "logistic";
  }
  return "normal";
}

inline KernelFamily kernel_family_from_string(const std::string& s) {
  if (s == "normal") return KernelFamily::normal;
  if (s == "student") return KernelFamily::student;
  if (s == "logistic") return KernelFamily::logistic;
  throw std::invalid_argument("unknown kernel family: " + s);
}

/// One mixture component. `shape` is the Student degrees of freedom and must
/// be present exactly when the family is student.
struct MixtureComponent {
  double weight = 0.0;
  double location = 0.0;
  double scale = 1.0;
  std::optional<double> shape;
};

struct MixtureModel {
  KernelFamily family = KernelFamily::normal;
  std::vector<MixtureComponent> components;

  std::size_t order() const { return components.size(); }
};

inline void validate_model(const MixtureModel& m) {
  if (m.components.empty()) throw std::invalid_argument("mixture has no components");
  double sum = 0.0;
  for (const auto& c : m.components) {
    if (!(c.weight >= 0.0 && c.weight <= 1.0 + 1e-12))
      throw std::invalid_argument("component weight outside [0,1]");
    if (!(c.scale > 0.0) || !std::isfinite(c.scale))
      throw std::invalid_argument("component scale must be positive");
    if (!std::isfinite(c.location)) throw std::invalid_argument("component location not finite");
    if (m.family == KernelFamily::student) {
      if (!c.shape || !(*c.shape > 0.0))
        throw std::invalid_argument("student component requires shape > 0");
    } else if (c.shape) {
      throw std::invalid_argument("shape parameter only valid for student kernels");
    }
    sum += c.weight;
  }
  if (std::abs(sum - 1.0) > 1e-10)
    throw std::invalid_argument("component weights must sum to 1");
}

namespace detail {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kSqrt2 = 1.41421356237309504880;

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

inline double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

// Continued fraction for the incomplete beta function, evaluated with the
// modified Lentz method. Only called on the rapidly converging side
// x < (a+1)/(a+b+2).
inline double ibeta_cf(double a, double b, double x) {
  const double fpmin = 1e-300;
  const double eps = 3e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 4000; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

/// Regularized incomplete beta function I_x(a, b).
inline double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * ibeta_cf(a, b, x) / a;
  return 1.0 - front * ibeta_cf(b, a, 1.0 - x) / b;
}

/// Student-t distribution function with r > 0 degrees of freedom.
inline double student_cdf(double z, double r) {
  if (z == 0.0) return 0.5;
  const double x = r / (r + z * z);
  const double p = 0.5 * reg_inc_beta(0.5 * r, 0.5, x);
  return z > 0.0 ? 1.0 - p : p;
}

inline double student_log_pdf(double z, double r) {
  return std::lgamma(0.5 * (r + 1.0)) - std::lgamma(0.5 * r) - 0.5 * std::log(r * kPi) -
         0.5 * (r + 1.0) * std::log1p(z * z / r);
}

inline double student_pdf(double z, double r) { return std::exp(student_log_pdf(z, r)); }

inline double logistic_cdf(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double logistic_pdf(double z) {
  const double e = std::exp(-std::abs(z));
  const double d = 1.0 + e;
  return e / (d * d);
}

inline double logistic_log_pdf(double z) {
  const double az = std::abs(z);
  return -az - 2.0 * std::log1p(std::exp(-az));
}

}  // namespace detail

/// Standardized kernel distribution function. `shape` is required for the
/// student family and rejected otherwise.
inline double kernel_cdf(KernelFamily family, double z, std::optional<double> shape = {}) {
  switch (family) {
    case KernelFamily::normal: return detail::normal_cdf(z);
    case KernelFamily::student:
      if (!shape || !(*shape > 0.0))
        throw std::invalid_argument("student kernel requires shape > 0");
      return detail::student_cdf(z, *shape);
    case KernelFamily::logistic: return detail::logistic_cdf(z);
  }
  return 0.0;
}

inline double kernel_pdf(KernelFamily family, double z, std::optional<double> shape = {}) {
  switch (family) {
    case KernelFamily::normal: return detail::normal_pdf(z);
    case KernelFamily::student:
      if (!shape || !(*shape > 0.0))
        throw std::invalid_argument("student kernel requires shape > 0");
      return detail::student_pdf(z, *shape);
    case KernelFamily::logistic: return detail::logistic_pdf(z);
  }
  return 0.0;
}

inline double kernel_log_pdf(KernelFamily family, double z, std::optional<double> shape = {}) {
  switch (family) {
    case KernelFamily::normal: return -0.5 * z * z - detail::kLogSqrt2Pi;
    case KernelFamily::student:
      if (!shape || !(*shape > 0.0))
        throw std::invalid_argument("student kernel requires shape > 0");
      return detail::student_log_pdf(z, *shape);
    case KernelFamily::logistic: return detail::logistic_log_pdf(z);
  }
  return -std::numeric_limits<double>::infinity();
}

inline double mixture_cdf(const MixtureModel& m, double x) {
  double s = 0.0;
  for (const auto& c : m.components)
    s += c.weight * kernel_cdf(m.family, (x - c.location) / c.scale, c.shape);
  return s;
}

inline double mixture_pdf(const MixtureModel& m, double x) {
  double s = 0.0;
  for (const auto& c : m.components) {
    if (c.weight == 0.0) continue;
    s += c.weight / c.scale * kernel_pdf(m.family, (x - c.location) / c.scale, c.shape);
  }
  return s;
}

/// log of mixture_pdf computed with a log-sum-exp over the components.
inline double mixture_log_pdf(const MixtureModel& m, double x) {
  double mx = -std::numeric_limits<double>::infinity();
  double terms[64];
  std::vector<double> heap;
  double* t = terms;
  if (m.components.size() > 64) {
    heap.resize(m.components.size());
    t = heap.data();
  }
  for (std::size_t k = 0; k < m.components.size(); ++k) {
    const auto& c = m.components[k];
    if (c.weight <= 0.0) {
      t[k] = -std::numeric_limits<double>::infinity();
      continue;
    }
    t[k] = std::log(c.weight) - std::log(c.scale) +
           kernel_log_pdf(m.family, (x - c.location) / c.scale, c.shape);
    mx = std::max(mx, t[k]);
  }
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (std::size_t k = 0; k < m.components.size(); ++k) s += std::exp(t[k] - mx);
  return mx + std::log(s);
}

/// Quantile by bisection on a bracket widened until it straddles q.
/// Terminates when |F(x) - q| <= 1e-10 or the bracket collapses.
inline double mixture_quantile(const MixtureModel& m, double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile level must lie in (0,1)");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& c : m.components) {
    // heavy student tails get a wider initial bracket
    const double s = m.family == KernelFamily::student ? 10.0 : 1.0;
    lo = std::min(lo, c.location - 12.0 * c.scale * s);
    hi = std::max(hi, c.location + 12.0 * c.scale * s);
  }
  for (int guard = 0; mixture_cdf(m, lo) > q && guard < 2000; ++guard) lo -= (hi - lo);
  for (int guard = 0; mixture_cdf(m, hi) < q && guard < 2000; ++guard) hi += (hi - lo);
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 500; ++it) {
    mid = 0.5 * (lo + hi);
    const double f = mixture_cdf(m, mid);
    if (std::abs(f - q) <= 1e-10) return mid;
    if (f < q)
      lo = mid;
    else
      hi = mid;
    const double span = std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
    if (hi - lo <= std::numeric_limits<double>::epsilon() * span) break;
  }
  return mid;
}

struct MixtureMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Mean and variance of the mixture law. Student components need r > 2 for a
/// finite variance; logistic components have variance (pi*b)^2/3.
inline MixtureMoments mixture_moments(const MixtureModel& m) {
  double mean = 0.0;
  double second = 0.0;
  for (const auto& c : m.components) {
    double v = 0.0;
    switch (m.family) {
      case KernelFamily::normal: v = c.scale * c.scale; break;
      case KernelFamily::logistic:
        v = detail::kPi * detail::kPi * c.scale * c.scale / 3.0;
        break;
      case KernelFamily::student: {
        const double r = c.shape.value_or(0.0);
        if (r <= 2.0)
          throw std::domain_error("student mixture variance undefined for shape <= 2");
        v = c.scale * c.scale * r / (r - 2.0);
        break;
      }
    }
    mean += c.weight * c.location;
    second += c.weight * (c.location * c.location + v);
  }
  return {mean, second - mean * mean};
}

namespace detail {
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

/// Flat text record `family,K,p_1,a_1,b_1[,r_1],...` used in reports and
/// golden files.
inline std::string to_record(const MixtureModel& m) {
  std::string out = to_string(m.family) + "," + std::to_string(m.components.size());
  for (const auto& c : m.components) {
    out += "," + detail::fmt_double(c.weight);
    out += "," + detail::fmt_double(c.location);
    out += "," + detail::fmt_double(c.scale);
    if (m.family == KernelFamily::student) out += "," + detail::fmt_double(c.shape.value_or(0.0));
  }
  return out;
}

inline MixtureModel model_from_record(const std::string& line) {
  std::vector<std::string> tok;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) tok.push_back(cur);
  if (tok.size() < 2) throw std::invalid_argument("malformed mixture record: " + line);
  MixtureModel m;
  m.family = kernel_family_from_string(tok[0]);
  const std::size_t k = std::stoul(tok[1]);
  const std::size_t per = m.family == KernelFamily::student ? 4 : 3;
  if (tok.size() != 2 + per * k) throw std::invalid_argument("malformed mixture record: " + line);
  for (std::size_t i = 0; i < k; ++i) {
    MixtureComponent c;
    c.weight = std::stod(tok[2 + per * i]);
    c.location = std::stod(tok[3 + per * i]);
    c.scale = std::stod(tok[4 + per * i]);
    if (per == 4) c.shape = std::stod(tok[5 + per * i]);
    m.components.push_back(c);
  }
  validate_model(m);
  return m;
}

}  // namespace msm
