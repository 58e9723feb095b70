#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "msm/separation.hpp"
#include "msm/series.hpp"

namespace msm {

enum class UniformEstimator { mean, median, mode };

inline std::string to_string(UniformEstimator e) {
  switch (e) {
    case UniformEstimator::mean: return "mean";
    case UniformEstimator::median: return "median";
    case UniformEstimator::mode: return "mode";
  }
  return "mean";
}

inline UniformEstimator uniform_estimator_from_string(const std::string& s) {
  if (s == "mean") return UniformEstimator::mean;
  if (s == "median") return UniformEstimator::median;
  if (s == "mode") return UniformEstimator::mode;
  throw std::invalid_argument("unknown uniform estimator: " + s);
}

/// Reconstructed drift/diffusion values at window end positions.
struct CoefficientSeries {
  std::vector<std::size_t> indices;
  std::vector<double> a_bar;
  std::vector<double> b_bar;
  UniformEstimator estimator = UniformEstimator::mean;
};

namespace detail {

/// Smallest atom value whose cumulative probability reaches 1/2.
inline double discrete_median(std::vector<std::pair<double, double>> atoms) {
  std::sort(atoms.begin(), atoms.end());
  double acc = 0.0;
  for (const auto& [value, prob] : atoms) {
    acc += prob;
    if (acc >= 0.5 - 1e-12) return value;
  }
  return atoms.back().first;
}

}  // namespace detail

/// Window-level drift/diffusion estimates from the fitted mixture atoms:
/// expectation, marginal medians, or the discrete mode of (A,B).
inline CoefficientSeries uniform_reconstruct(std::span<const WindowEstimate> estimates,
                                             UniformEstimator estimator) {
  if (estimates.empty()) throw std::invalid_argument("no estimates to reconstruct from");
  CoefficientSeries out;
  out.estimator = estimator;
  out.indices.reserve(estimates.size());
  out.a_bar.reserve(estimates.size());
  out.b_bar.reserve(estimates.size());
  for (const auto& est : estimates) {
    const auto& comps = est.model.components;
    double a = 0.0, b = 0.0;
    switch (estimator) {
      case UniformEstimator::mean: {
        for (const auto& c : comps) {
          a += c.weight * c.location;
          b += c.weight * c.scale;
        }
        break;
      }
      case UniformEstimator::median: {
        std::vector<std::pair<double, double>> atoms_a, atoms_b;
        for (const auto& c : comps) {
          atoms_a.emplace_back(c.location, c.weight);
          atoms_b.emplace_back(c.scale, c.weight);
        }
        a = detail::discrete_median(std::move(atoms_a));
        b = detail::discrete_median(std::move(atoms_b));
        break;
      }
      case UniformEstimator::mode: {
        std::size_t best = 0;
        for (std::size_t k = 1; k < comps.size(); ++k)
          if (comps[k].weight > comps[best].weight) best = k;
        a = comps[best].location;
        b = comps[best].scale;
        break;
      }
    }
    out.indices.push_back(est.index);
    out.a_bar.push_back(a);
    out.b_bar.push_back(b);
  }
  return out;
}

enum class BinMode { U, Q };

inline std::string to_string(BinMode m) { return m == BinMode::U ? "U" : "Q"; }

inline BinMode bin_mode_from_string(const std::string& s) {
  if (s == "U" || s == "u") return BinMode::U;
  if (s == "Q" || s == "q") return BinMode::Q;
  throw std::invalid_argument("unknown bin mode: " + s);
}

/// State bins over a window's value range [m_i, M_i]: U splits it into equal
/// lengths, Q places boundaries at order statistics of equidistant ranks.
struct BinLayout {
  BinMode mode = BinMode::U;
  std::size_t J = 2;
  std::vector<double> boundaries;  // J+1 strictly increasing values
};

inline BinLayout bin_layout(const WindowView& w, BinMode mode, std::size_t J) {
  if (J < 2) throw std::invalid_argument("bin count J must be >= 2");
  const std::size_t n = w.width();
  BinLayout layout;
  layout.mode = mode;
  layout.J = J;
  layout.boundaries.resize(J + 1);
  if (mode == BinMode::U) {
    const auto [mn, mx] = std::minmax_element(w.values.begin(), w.values.end());
    if (!(*mn < *mx))
      throw std::runtime_error("degenerate window: all observations identical");
    for (std::size_t j = 0; j <= J; ++j)
      layout.boundaries[j] =
          *mn + (*mx - *mn) * static_cast<double>(j) / static_cast<double>(J);
    layout.boundaries[0] = *mn;
    layout.boundaries[J] = *mx;
  } else {
    std::vector<double> sorted(w.values.begin(), w.values.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t j = 0; j <= J; ++j) {
      const std::size_t rank = 1 + (j * (n - 1) + J - 1) / J;  // 1 + ceil(j(n-1)/J)
      layout.boundaries[j] = sorted[rank - 1];
    }
    for (std::size_t j = 0; j < J; ++j)
      if (!(layout.boundaries[j] < layout.boundaries[j + 1]))
        throw std::runtime_error("equiprobable bins need more distinct values than J");
  }
  return layout;
}

/// 0-based bin index; bins are [left, right) with the last bin closed.
inline std::size_t bin_of(const BinLayout& layout, double x) {
  const auto& b = layout.boundaries;
  if (x >= b.back()) return layout.J - 1;
  if (x <= b.front()) return 0;
  const std::size_t idx = std::upper_bound(b.begin(), b.end(), x) - b.begin();
  return idx - 1;
}

enum class DriftEstimator { avg, mode, med };

inline std::string to_string(DriftEstimator e) {
  switch (e) {
    case DriftEstimator::avg: return "avg";
    case DriftEstimator::mode: return "mode";
    case DriftEstimator::med: return "med";
  }
  return "avg";
}

inline DriftEstimator drift_estimator_from_string(const std::string& s) {
  if (s == "avg") return DriftEstimator::avg;
  if (s == "mode") return DriftEstimator::mode;
  if (s == "med") return DriftEstimator::med;
  throw std::invalid_argument("unknown drift estimator: " + s);
}

/// Per-bin drift estimates for one window. `degenerate` marks a constant
/// window handled without a bin layout (all drifts zero-filled from the zero
/// increments).
struct NonUniformEstimate {
  std::size_t index = 0;
  std::vector<double> boundaries;
  std::vector<std::size_t> nu;
  std::vector<double> alpha;
  std::vector<double> beta_sq;
  std::vector<char> empty_bin;
  std::vector<char> fit_fallback;
  double selected_drift = 0.0;
  std::size_t selected_bin = 0;  // 0-based
  DriftEstimator estimator = DriftEstimator::avg;
  bool degenerate = false;

  std::size_t nu_min() const {
    std::size_t m = nu.empty() ? 0 : nu[0];
    for (std::size_t v : nu) m = std::min(m, v);
    return m;
  }
};

namespace detail {

inline double lower_middle_median(std::vector<double> d) {
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  return n % 2 == 1 ? d[n / 2] : d[n / 2 - 1];
}

inline double interp_quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac;
}

/// Histogram mode with Freedman-Diaconis bin widths; ties resolve to the
/// leftmost bin, a zero IQR falls back to the sample median.
inline double histogram_mode(std::vector<double> d) {
  if (d.size() == 1) return d[0];
  std::sort(d.begin(), d.end());
  const double iqr = interp_quantile(d, 0.75) - interp_quantile(d, 0.25);
  const double lo = d.front(), hi = d.back();
  if (!(iqr > 0.0) || !(hi > lo)) return lower_middle_median(std::move(d));
  const double width = 2.0 * iqr / std::cbrt(static_cast<double>(d.size()));
  const auto nbins = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil((hi - lo) / width)), 1, 1024);
  std::vector<std::size_t> counts(nbins, 0);
  for (double v : d) {
    auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(nbins));
    counts[std::min(b, nbins - 1)]++;
  }
  const std::size_t best = std::max_element(counts.begin(), counts.end()) - counts.begin();
  return lo + (static_cast<double>(best) + 0.5) * (hi - lo) / static_cast<double>(nbins);
}

/// argmax of the mixture density: coarse grid then a golden-section polish.
inline double density_argmax(const MixtureModel& m, double lo, double hi) {
  if (!(hi > lo)) return lo;
  const int grid = 512;
  double best_x = lo;
  double best_f = -1.0;
  for (int i = 0; i <= grid; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / grid;
    const double f = mixture_pdf(m, x);
    if (f > best_f) {
      best_f = f;
      best_x = x;
    }
  }
  const double cell = (hi - lo) / grid;
  return golden_max([&](double x) { return mixture_pdf(m, x); },
                    best_x - cell, best_x + cell);
}

inline double population_variance(const std::vector<double>& d) {
  const double m = sample_mean(d);
  double s = 0.0;
  for (double v : d) s += (v - m) * (v - m);
  return s / static_cast<double>(d.size());
}

}  // namespace detail

/// Per-bin successor-increment drift estimates (avg / mode / med). Members
/// are all observations but the last (it has no successor); the last
/// observation still selects the reported bin. An optional SeparationConfig
/// fits a mixture to each bin's increments for the mode/variance.
inline NonUniformEstimate nonuniform_reconstruct(
    const WindowView& w, const BinLayout& layout, DriftEstimator estimator,
    const std::optional<SeparationConfig>& fit = {}) {
  const std::size_t n = w.width();
  if (n < 3) throw std::invalid_argument("nonuniform reconstruction needs a window of >= 3");
  const std::size_t J = layout.J;
  std::vector<std::vector<double>> bins(J);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const std::size_t b = bin_of(layout, w.values[k]);
    bins[b].push_back(w.values[k + 1] - w.values[k]);
  }
  NonUniformEstimate est;
  est.index = w.last_index;
  est.boundaries = layout.boundaries;
  est.estimator = estimator;
  est.nu.resize(J);
  est.alpha.assign(J, 0.0);
  est.beta_sq.assign(J, 0.0);
  est.empty_bin.assign(J, 0);
  est.fit_fallback.assign(J, 0);
  bool any = false;
  for (std::size_t j = 0; j < J; ++j) {
    auto& d = bins[j];
    est.nu[j] = d.size();
    if (d.empty()) {
      est.empty_bin[j] = 1;  // downstream may treat this as "fall back to AR"
      continue;
    }
    any = true;
    std::optional<MixtureModel> bin_model;
    if (fit) {
      if (d.size() >= 3 * fit->K && detail::sample_std(d) > 0.0) {
        WindowView dv{d.size(), std::span<const double>(d)};
        bin_model = em_fit(dv, *fit).model;
      } else {
        est.fit_fallback[j] = 1;
      }
    }
    switch (estimator) {
      case DriftEstimator::avg: est.alpha[j] = detail::sample_mean(d); break;
      case DriftEstimator::med: est.alpha[j] = detail::lower_middle_median(d); break;
      case DriftEstimator::mode: {
        if (bin_model) {
          const auto [mn, mx] = std::minmax_element(d.begin(), d.end());
          est.alpha[j] = detail::density_argmax(*bin_model, *mn, *mx);
        } else {
          est.alpha[j] = detail::histogram_mode(d);
        }
        break;
      }
    }
    if (bin_model) {
      try {
        est.beta_sq[j] = mixture_moments(*bin_model).variance;
      } catch (const std::domain_error&) {
        est.beta_sq[j] = detail::population_variance(d);
      }
    } else {
      est.beta_sq[j] = detail::population_variance(d);
    }
  }
  if (!any) throw std::runtime_error("all bins empty");
  est.selected_bin = bin_of(layout, w.values[n - 1]);
  est.selected_drift = est.alpha[est.selected_bin];
  return est;
}

/// Drift value for an arbitrary state x under a previously computed
/// estimate; x outside the layout clamps to the nearest bin.
inline double alpha_at(const NonUniformEstimate& est, double x) {
  if (est.degenerate || est.boundaries.empty()) return est.alpha.empty() ? 0.0 : est.alpha[0];
  BinLayout layout;
  layout.J = est.alpha.size();
  layout.boundaries = est.boundaries;
  return est.alpha[bin_of(layout, x)];
}

/// nonuniform_reconstruct that survives constant windows: a degenerate
/// window has zero increments everywhere, so every bin drift is zero.
inline NonUniformEstimate nonuniform_estimate_for_window(
    const WindowView& w, BinMode mode, std::size_t J, DriftEstimator estimator,
    const std::optional<SeparationConfig>& fit = {}) {
  const auto [mn, mx] = std::minmax_element(w.values.begin(), w.values.end());
  if (!(*mn < *mx)) {
    NonUniformEstimate est;
    est.index = w.last_index;
    est.estimator = estimator;
    est.degenerate = true;
    est.nu.assign(J, 0);
    est.nu[0] = w.width() - 1;
    est.alpha.assign(J, 0.0);
    est.beta_sq.assign(J, 0.0);
    est.empty_bin.assign(J, 1);
    est.empty_bin[0] = 0;
    est.fit_fallback.assign(J, 0);
    return est;
  }
  return nonuniform_reconstruct(w, bin_layout(w, mode, J), estimator, fit);
}

/// Second-level reconstruction: the first-level drift series is treated as a
/// fresh series and run through the same per-window binning. Output indices
/// refer to the original series positions.
inline std::vector<NonUniformEstimate> second_level(
    const TimeSeries& series, std::span<const NonUniformEstimate> first_level, std::size_t n,
    BinMode mode, std::size_t J, DriftEstimator estimator,
    const std::optional<SeparationConfig>& fit = {}) {
  if (first_level.empty()) throw std::invalid_argument("first level is empty");
  if (series.size() < 2 * n)
    throw std::invalid_argument("series shorter than two window widths");
  if (first_level.size() < n)
    throw std::invalid_argument("not enough first-level estimates for a window");
  std::vector<double> drift(first_level.size());
  for (std::size_t i = 0; i < first_level.size(); ++i) drift[i] = first_level[i].selected_drift;
  std::vector<NonUniformEstimate> out;
  for (const WindowView w : windows(std::span<const double>(drift), n)) {
    NonUniformEstimate est = nonuniform_estimate_for_window(w, mode, J, estimator, fit);
    est.index = first_level[w.last_index - 1].index;
    out.push_back(std::move(est));
  }
  return out;
}

}  // namespace msm
