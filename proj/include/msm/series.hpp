#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "msm/kernels.hpp"

namespace msm {

/// Univariate series observed at equidistant time steps. Timestamps (epoch
/// minutes) are optional provenance; all downstream math assumes a unit step.
struct TimeSeries {
  std::vector<double> values;
  std::vector<std::int64_t> timestamps;  // empty when absent
  std::string name;

  std::size_t size() const { return values.size(); }
};

inline void validate_series(const TimeSeries& s) {
  if (s.values.empty()) throw std::invalid_argument("series is empty");
  if (!s.timestamps.empty()) {
    if (s.timestamps.size() != s.values.size())
      throw std::invalid_argument("timestamps/values length mismatch");
    for (std::size_t i = 1; i < s.timestamps.size(); ++i)
      if (s.timestamps[i] <= s.timestamps[i - 1])
        throw std::invalid_argument("timestamps must be strictly increasing");
  }
  for (double v : s.values)
    if (!std::isfinite(v)) throw std::invalid_argument("series contains non-finite values");
}

/// View of n consecutive observations X_{i-n+1},...,X_i. `last_index` is the
/// 1-based position i of the last element within the parent series.
struct WindowView {
  std::size_t last_index = 0;
  std::span<const double> values;

  std::size_t width() const { return values.size(); }
};

/// Lazy range of sliding windows with last indices n, n+stride, n+2*stride,...
class WindowRange {
 public:
  WindowRange(std::span<const double> data, std::size_t n, std::size_t stride)
      : data_(data), n_(n), stride_(stride) {
    if (n < 2) throw std::invalid_argument("window width must be >= 2");
    if (n > data.size()) throw std::invalid_argument("window width exceeds series length");
    if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  }

  class iterator {
   public:
    using value_type = WindowView;
    using difference_type = std::ptrdiff_t;

    iterator() = default;
    iterator(std::span<const double> data, std::size_t n, std::size_t stride, std::size_t last)
        : data_(data), n_(n), stride_(stride), last_(last) {}

    WindowView operator*() const { return {last_, data_.subspan(last_ - n_, n_)}; }
    iterator& operator++() {
      last_ += stride_;
      return *this;
    }
    iterator operator++(int) {
      iterator tmp = *this;
      ++(*this);
      return tmp;
    }
    bool operator==(const iterator& o) const {
      const bool past_a = last_ > data_.size();
      const bool past_b = o.last_ > o.data_.size();
      if (past_a || past_b) return past_a == past_b;
      return last_ == o.last_;
    }
    bool operator!=(const iterator& o) const { return !(*this == o); }

   private:
    std::span<const double> data_;
    std::size_t n_ = 0, stride_ = 1;
    std::size_t last_ = std::size_t(-1);
  };

  iterator begin() const { return {data_, n_, stride_, n_}; }
  iterator end() const { return {data_, n_, stride_, data_.size() + 1}; }
  std::size_t count() const { return (data_.size() - n_) / stride_ + 1; }

 private:
  std::span<const double> data_;
  std::size_t n_, stride_;
};

inline WindowRange windows(const TimeSeries& s, std::size_t n, std::size_t stride = 1) {
  return WindowRange(std::span<const double>(s.values), n, stride);
}

inline WindowRange windows(std::span<const double> data, std::size_t n, std::size_t stride = 1) {
  return WindowRange(data, n, stride);
}

/// Window ending at the given 1-based index.
inline WindowView window_at(std::span<const double> data, std::size_t last_index, std::size_t n) {
  if (last_index < n || last_index > data.size())
    throw std::invalid_argument("window does not fit the series");
  return {last_index, data.subspan(last_index - n, n)};
}

/// Block-mean smoothing: element j of the output is the mean of input block
/// [j*block, (j+1)*block); the trailing remainder is dropped.
inline TimeSeries smooth(const TimeSeries& s, std::size_t block) {
  if (block != 2 && block != 4) throw std::invalid_argument("smoothing block must be 2 or 4");
  if (s.size() < block) throw std::invalid_argument("series shorter than smoothing block");
  TimeSeries out;
  out.name = s.name;
  const std::size_t m = s.size() / block;
  out.values.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    double acc = 0.0;
    for (std::size_t r = 0; r < block; ++r) acc += s.values[j * block + r];
    out.values.push_back(acc / static_cast<double>(block));
  }
  if (!s.timestamps.empty()) {
    out.timestamps.reserve(m);
    for (std::size_t j = 0; j < m; ++j) out.timestamps.push_back(s.timestamps[j * block]);
  }
  return out;
}

/// One-step differences X_{i+1} - X_i; the length shrinks by one.
inline TimeSeries increments(const TimeSeries& s) {
  if (s.size() < 2) throw std::invalid_argument("increments need at least two observations");
  TimeSeries out;
  out.name = s.name.empty() ? std::string("increments") : s.name + "_inc";
  out.values.resize(s.size() - 1);
  for (std::size_t i = 0; i + 1 < s.size(); ++i) out.values[i] = s.values[i + 1] - s.values[i];
  if (!s.timestamps.empty())
    out.timestamps.assign(s.timestamps.begin() + 1, s.timestamps.end());
  return out;
}

/// Inverse of increments: partial sums prefixed with `start`.
inline TimeSeries cumsum(const TimeSeries& d, double start = 0.0) {
  TimeSeries out;
  out.name = d.name;
  out.values.reserve(d.size() + 1);
  out.values.push_back(start);
  double acc = start;
  for (double v : d.values) {
    acc += v;
    out.values.push_back(acc);
  }
  return out;
}

enum class SyntheticKind { brownian, ou, gbm, mixture_iid, piecewise_ito };

inline std::string to_string(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::brownian: return "brownian";
    case SyntheticKind::ou: return "ou";
    case SyntheticKind::gbm: return "gbm";
    case SyntheticKind::mixture_iid: return "mixture_iid";
    case SyntheticKind::piecewise_ito: return "piecewise_ito";
  }
  return "brownian";
}

inline SyntheticKind synthetic_kind_from_string(const std::string& s) {
  if (s == "brownian") return SyntheticKind::brownian;
  if (s == "ou") return SyntheticKind::ou;
  if (s == "gbm") return SyntheticKind::gbm;
  if (s == "mixture_iid") return SyntheticKind::mixture_iid;
  if (s == "piecewise_ito") return SyntheticKind::piecewise_ito;
  throw std::invalid_argument("unknown synthetic kind: " + s);
}

/// Generator parameters. Only the fields relevant to `kind` are read.
struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::brownian;
  std::size_t length = 2;
  std::uint64_t seed = 0;
  double x0 = 0.0;
  double dt = 1.0;
  double drift = 0.0;                    // brownian / gbm drift rate
  double sigma = 1.0;                    // diffusion scale
  double theta = 1.0;                    // ou mean reversion speed
  MixtureModel mixture;                  // mixture_iid source law
  std::vector<double> seg_drift{0.0};    // piecewise_ito per-segment drift
  std::vector<double> seg_sigma{1.0};    // piecewise_ito per-segment diffusion
};

namespace detail {

/// Deterministic standard normal stream (Box-Muller over mt19937_64), so
/// synthetic paths are reproducible across standard libraries.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace detail

/// Deterministic synthetic paths; Euler scheme for the diffusion kinds.
inline TimeSeries simulate(const SyntheticSpec& spec) {
  if (spec.length < 2) throw std::invalid_argument("synthetic length must be >= 2");
  if (!(spec.dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (spec.sigma < 0.0) throw std::invalid_argument("sigma must be nonnegative");
  detail::NormalSampler normal(spec.seed);
  TimeSeries out;
  out.name = to_string(spec.kind);
  out.values.reserve(spec.length);
  const double sdt = std::sqrt(spec.dt);
  switch (spec.kind) {
    case SyntheticKind::brownian: {
      double x = spec.x0;
      out.values.push_back(x);
      for (std::size_t i = 1; i < spec.length; ++i) {
        x += spec.drift * spec.dt + spec.sigma * sdt * normal();
        out.values.push_back(x);
      }
      break;
    }
    case SyntheticKind::ou: {
      double x = spec.x0;
      out.values.push_back(x);
      for (std::size_t i = 1; i < spec.length; ++i) {
        x += -spec.theta * x * spec.dt + spec.sigma * sdt * normal();
        out.values.push_back(x);
      }
      break;
    }
    case SyntheticKind::gbm: {
      double x = spec.x0 == 0.0 ? 1.0 : spec.x0;
      out.values.push_back(x);
      for (std::size_t i = 1; i < spec.length; ++i) {
        x += spec.drift * x * spec.dt + spec.sigma * x * sdt * normal();
        out.values.push_back(x);
      }
      break;
    }
    case SyntheticKind::mixture_iid: {
      validate_model(spec.mixture);
      if (spec.mixture.family != KernelFamily::normal)
        throw std::invalid_argument("mixture_iid draws from a finite normal mixture");
      for (std::size_t i = 0; i < spec.length; ++i) {
        const double u = normal.uniform();
        double acc = 0.0;
        const MixtureComponent* pick = &spec.mixture.components.back();
        for (const auto& c : spec.mixture.components) {
          acc += c.weight;
          if (u < acc) {
            pick = &c;
            break;
          }
        }
        out.values.push_back(pick->location + pick->scale * normal());
      }
      break;
    }
    case SyntheticKind::piecewise_ito: {
      if (spec.seg_drift.empty() || spec.seg_drift.size() != spec.seg_sigma.size())
        throw std::invalid_argument("piecewise_ito needs matching drift/sigma segment lists");
      for (double b : spec.seg_sigma)
        if (b < 0.0) throw std::invalid_argument("segment sigma must be nonnegative");
      const std::size_t segments = spec.seg_drift.size();
      double x = spec.x0;
      out.values.push_back(x);
      for (std::size_t i = 1; i < spec.length; ++i) {
        const std::size_t s = std::min(segments - 1, i * segments / spec.length);
        x += spec.seg_drift[s] * spec.dt + spec.seg_sigma[s] * sdt * normal();
        out.values.push_back(x);
      }
      break;
    }
  }
  return out;
}

namespace detail {

inline double sample_mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Population standard deviation (MLE convention).
inline double sample_std(std::span<const double> x) {
  const double m = sample_mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size()));
}

}  // namespace detail

}  // namespace msm
