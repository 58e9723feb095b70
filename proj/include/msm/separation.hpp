#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "msm/kernels.hpp"
#include "msm/optim.hpp"
#include "msm/series.hpp"
#include "msm/weighting.hpp"

namespace msm {

/// Weighted empirical distribution function F*(x) = sum of the weights
/// attached (chronologically) to sample points strictly below x.
struct EmpiricalCDF {
  std::vector<double> points;  // ascending sample values
  std::vector<double> cum;     // cumulative weight through each point
  bool uniform = false;        // exact count/n evaluation for the classical EDF

  double operator()(double x) const {
    const std::size_t k =
        std::lower_bound(points.begin(), points.end(), x) - points.begin();
    if (k == 0) return 0.0;
    if (uniform) return static_cast<double>(k) / static_cast<double>(points.size());
    return cum[k - 1];
  }

  double total() const {
    if (points.empty()) return 0.0;
    return uniform ? 1.0 : cum.back();
  }
};

/// WEDF from explicit chronological weights (w[j] belongs to the j-th
/// observation of the window in time order).
inline EmpiricalCDF empirical_cdf(const WindowView& w, std::span<const double> ws,
                                  bool exact_uniform = false) {
  const std::size_t n = w.width();
  if (ws.size() != n) throw std::invalid_argument("weights/window length mismatch");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return w.values[a] < w.values[b]; });
  EmpiricalCDF F;
  F.uniform = exact_uniform;
  F.points.resize(n);
  F.cum.resize(n);
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    F.points[k] = w.values[idx[k]];
    acc += ws[idx[k]];
    F.cum[k] = acc;
  }
  return F;
}

inline EmpiricalCDF empirical_cdf(const WindowView& w, const WeightScheme& scheme) {
  const std::vector<double> ws = weights(scheme, w.width());
  return empirical_cdf(w, ws, scheme.is_uniform() && scheme.normalize);
}

enum class FitMethod { em, l2, hybrid };

inline std::string to_string(FitMethod m) {
  switch (m) {
    case FitMethod::em: return "em";
    case FitMethod::l2: return "l2";
    case FitMethod::hybrid: return "hybrid";
  }
  return "em";
}

inline FitMethod fit_method_from_string(const std::string& s) {
  if (s == "em") return FitMethod::em;
  if (s == "l2") return FitMethod::l2;
  if (s == "hybrid") return FitMethod::hybrid;
  throw std::invalid_argument("unknown fit method: " + s);
}

struct SeparationConfig {
  KernelFamily family = KernelFamily::normal;
  std::size_t K = 3;
  FitMethod method = FitMethod::em;
  double lambda = 0.0;             // hybrid log-likelihood penalty weight
  WeightScheme weight_scheme;      // likelihood / WEDF weights
  // arbitrary nonnegative nondecreasing weights, overriding the scheme when
  // the length matches the window
  std::vector<double> explicit_weights;
  bool weighted_l2_terms = false;  // per-term l2 weights from the scheme
  std::size_t grid_size_M = 0;     // 0 -> max(20, 3K-1)
  std::size_t max_iter = 500;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  bool record_trace = false;
  double scale_floor_factor = 1e-6;
  double student_shape_min = 0.5;
  double student_shape_max = 200.0;
};

inline std::vector<double> window_weights(const SeparationConfig& cfg, std::size_t n) {
  if (!cfg.explicit_weights.empty()) {
    if (cfg.explicit_weights.size() != n)
      throw std::invalid_argument("explicit weights do not match the window width");
    return cfg.explicit_weights;
  }
  return weights(cfg.weight_scheme, n);
}

inline std::size_t effective_grid_size(const SeparationConfig& cfg, std::size_t n) {
  std::size_t m = cfg.grid_size_M > 0 ? cfg.grid_size_M : std::max<std::size_t>(20, 3 * cfg.K - 1);
  return std::min(m, n);
}

/// Per-window separation result. `trace` holds the per-iteration objective
/// when SeparationConfig::record_trace is set.
struct WindowEstimate {
  std::size_t index = 0;  // 1-based last index of the window
  MixtureModel model;
  double loglik = 0.0;  // weighted log-likelihood at the solution
  double l2 = 0.0;      // l2 discrepancy at the solution
  std::size_t iterations = 0;
  bool converged = false;
  int floored = 0;  // scale-floor activations
  int merged = 0;   // collapsed-component merges
  std::vector<double> trace;
};

struct L2Problem {
  std::vector<double> xs;       // grid points: order statistics of equidistant ranks
  std::vector<double> targets;  // F*(x_j)
  std::vector<double> omega;    // per-term weights
};

inline L2Problem make_l2_problem(const WindowView& w, const SeparationConfig& cfg) {
  const std::size_t n = w.width();
  const std::size_t M = effective_grid_size(cfg, n);
  if (M < 2) throw std::invalid_argument("l2 grid needs at least two points");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return w.values[a] < w.values[b]; });
  const std::vector<double> ws = window_weights(cfg, n);
  const EmpiricalCDF F = empirical_cdf(
      w, ws, cfg.explicit_weights.empty() && cfg.weight_scheme.is_uniform() &&
                 cfg.weight_scheme.normalize);
  const std::vector<double>& v = ws;
  L2Problem prob;
  prob.xs.resize(M);
  prob.targets.resize(M);
  prob.omega.resize(M);
  const double h = static_cast<double>(n - 1) / static_cast<double>(M - 1);
  for (std::size_t j = 0; j < M; ++j) {
    auto rank = static_cast<std::size_t>(std::llround(1.0 + static_cast<double>(j) * h));
    rank = std::clamp<std::size_t>(rank, 1, n);
    const std::size_t src = idx[rank - 1];
    prob.xs[j] = w.values[src];
    prob.targets[j] = F(prob.xs[j]);
    prob.omega[j] = cfg.weighted_l2_terms ? v[src] : 1.0;
  }
  return prob;
}

inline double l2_discrepancy(const MixtureModel& m, const L2Problem& prob) {
  double s = 0.0;
  for (std::size_t j = 0; j < prob.xs.size(); ++j) {
    const double r = prob.targets[j] - mixture_cdf(m, prob.xs[j]);
    s += prob.omega[j] * r * r;
  }
  return s;
}

inline double weighted_loglik(const MixtureModel& m, std::span<const double> data,
                              std::span<const double> v) {
  double s = 0.0;
  for (std::size_t j = 0; j < data.size(); ++j) s += v[j] * mixture_log_pdf(m, data[j]);
  return s;
}

/// Deterministic first-window initialization: locations at the window
/// quantiles (k - 1/2)/K, scales = sample std / K, uniform weights.
inline MixtureModel cold_start(const WindowView& w, const SeparationConfig& cfg) {
  const std::size_t n = w.width();
  std::vector<double> sorted(w.values.begin(), w.values.end());
  std::sort(sorted.begin(), sorted.end());
  const double sd = detail::sample_std(w.values);
  if (!(sd > 0.0))
    throw std::runtime_error("degenerate window: all observations identical");
  MixtureModel m;
  m.family = cfg.family;
  for (std::size_t k = 1; k <= cfg.K; ++k) {
    const double q = (static_cast<double>(k) - 0.5) / static_cast<double>(cfg.K);
    const auto pos = static_cast<std::size_t>(std::llround(q * static_cast<double>(n - 1)));
    MixtureComponent c;
    c.weight = 1.0 / static_cast<double>(cfg.K);
    c.location = sorted[pos];
    c.scale = sd / static_cast<double>(cfg.K);
    if (cfg.family == KernelFamily::student) c.shape = 5.0;
    m.components.push_back(c);
  }
  return m;
}

namespace detail {

inline void check_fit_preconditions(const WindowView& w, const SeparationConfig& cfg) {
  if (cfg.K < 1) throw std::invalid_argument("mixture order K must be >= 1");
  if (w.width() < 3 * cfg.K)
    throw std::invalid_argument("window too small: need at least 3K observations");
  if (!(cfg.tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
}

inline MixtureModel initial_model(const WindowView& w, const SeparationConfig& cfg,
                                  const std::optional<MixtureModel>& init) {
  if (init) {
    if (init->components.size() != cfg.K || init->family != cfg.family)
      throw std::invalid_argument("init model does not match the configured family/K");
    return *init;
  }
  return cold_start(w, cfg);
}

/// Merges component pairs that collapsed onto each other and re-seeds the
/// freed slot at the widest gap between consecutive order statistics.
inline int merge_collapsed(MixtureModel& m, std::span<const double> sorted,
                           double reseed_scale) {
  int merged = 0;
  const std::size_t K = m.components.size();
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t j = i + 1; j < K; ++j) {
      auto& ci = m.components[i];
      auto& cj = m.components[j];
      if (std::abs(ci.location - cj.location) < 1e-9 && std::abs(ci.scale - cj.scale) < 1e-9) {
        const double total = ci.weight + cj.weight;
        double gap_mid = sorted.front();
        double best_gap = -1.0;
        for (std::size_t g = 0; g + 1 < sorted.size(); ++g) {
          const double gap = sorted[g + 1] - sorted[g];
          if (gap > best_gap) {
            best_gap = gap;
            gap_mid = 0.5 * (sorted[g] + sorted[g + 1]);
          }
        }
        ci.weight = 0.5 * total;
        cj.weight = 0.5 * total;
        cj.location = gap_mid;
        cj.scale = reseed_scale;
        ++merged;
      }
    }
  }
  return merged;
}

inline void renormalize_weights(MixtureModel& m) {
  double s = 0.0;
  for (const auto& c : m.components) s += c.weight;
  if (s > 0.0)
    for (auto& c : m.components) c.weight /= s;
}

struct EmPhaseResult {
  double objective = -std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
  int floored = 0;
};

/// Weighted EM for normal mixtures with exact E/M steps.
inline EmPhaseResult em_phase_normal(MixtureModel& model, std::span<const double> data,
                                     std::span<const double> v, double vsum, double floor,
                                     const SeparationConfig& cfg, std::size_t budget,
                                     std::vector<double>* trace) {
  const std::size_t n = data.size();
  const std::size_t K = model.components.size();
  std::vector<double> resp(n * K);
  std::vector<double> logw(K), logb(K);
  EmPhaseResult out;
  double prev = 0.0;
  while (out.iterations < budget) {
    ++out.iterations;
    for (std::size_t k = 0; k < K; ++k) {
      const auto& c = model.components[k];
      logw[k] = c.weight > 0.0 ? std::log(c.weight) : -std::numeric_limits<double>::infinity();
      logb[k] = std::log(c.scale);
    }
    double obj = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < K; ++k) {
        const auto& c = model.components[k];
        const double z = (data[j] - c.location) / c.scale;
        const double l = logw[k] - logb[k] - 0.5 * z * z - kLogSqrt2Pi;
        resp[j * K + k] = l;
        mx = std::max(mx, l);
      }
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) s += std::exp(resp[j * K + k] - mx);
      const double ll = mx + std::log(s);
      for (std::size_t k = 0; k < K; ++k) resp[j * K + k] = std::exp(resp[j * K + k] - ll);
      obj += v[j] * ll;
    }
    if (trace) trace->push_back(obj);
    if (out.iterations > 1 &&
        std::abs(obj - prev) <= cfg.tol * std::max(1.0, std::abs(prev))) {
      out.objective = obj;
      out.converged = true;
      return out;
    }
    prev = obj;
    out.objective = obj;
    for (std::size_t k = 0; k < K; ++k) {
      double sk = 0.0, sd = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double g = v[j] * resp[j * K + k];
        sk += g;
        sd += g * data[j];
      }
      auto& c = model.components[k];
      if (sk <= 1e-300) {  // starved component: freeze it with zero weight
        c.weight = 0.0;
        continue;
      }
      const double a = sd / sk;
      double sv = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double g = v[j] * resp[j * K + k];
        sv += g * (data[j] - a) * (data[j] - a);
      }
      double b = std::sqrt(sv / sk);
      if (b < floor) {
        b = floor;
        ++out.floored;
      }
      c.weight = sk / vsum;
      c.location = a;
      c.scale = b;
    }
  }
  return out;
}

template <class F>
double golden_max(F&& f, double lo, double hi, int iters = 40) {
  const double phi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a);
  double x2 = a + phi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    }
  }
  return f1 > f2 ? x1 : x2;
}

/// Latent-scale ECM for Student mixtures: expected precisions in the E step,
/// per-component shape updated by a profile golden-section search.
inline EmPhaseResult em_phase_student(MixtureModel& model, std::span<const double> data,
                                      std::span<const double> v, double vsum, double floor,
                                      const SeparationConfig& cfg, std::size_t budget,
                                      std::vector<double>* trace) {
  const std::size_t n = data.size();
  const std::size_t K = model.components.size();
  std::vector<double> comp_log(n * K);  // log(p_k f_k(d_j)/b_k)
  std::vector<double> resp(n * K);
  EmPhaseResult out;
  double prev = 0.0;

  auto fill_column = [&](std::size_t k) {
    const auto& c = model.components[k];
    const double lw =
        c.weight > 0.0 ? std::log(c.weight) : -std::numeric_limits<double>::infinity();
    const double lb = std::log(c.scale);
    const double r = *c.shape;
    const double cr = std::lgamma(0.5 * (r + 1.0)) - std::lgamma(0.5 * r) -
                      0.5 * std::log(r * kPi);
    for (std::size_t j = 0; j < n; ++j) {
      const double z = (data[j] - c.location) / c.scale;
      comp_log[j * K + k] = lw - lb + cr - 0.5 * (r + 1.0) * std::log1p(z * z / r);
    }
  };

  auto objective_rows = [&]() {
    double obj = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, comp_log[j * K + k]);
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) s += std::exp(comp_log[j * K + k] - mx);
      obj += v[j] * (mx + std::log(s));
    }
    return obj;
  };

  while (out.iterations < budget) {
    ++out.iterations;
    for (std::size_t k = 0; k < K; ++k) fill_column(k);
    double obj = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, comp_log[j * K + k]);
      double s = 0.0;
      for (std::size_t k = 0; k < K; ++k) s += std::exp(comp_log[j * K + k] - mx);
      const double ll = mx + std::log(s);
      for (std::size_t k = 0; k < K; ++k) resp[j * K + k] = std::exp(comp_log[j * K + k] - ll);
      obj += v[j] * ll;
    }
    if (trace) trace->push_back(obj);
    if (out.iterations > 1 &&
        std::abs(obj - prev) <= cfg.tol * std::max(1.0, std::abs(prev))) {
      out.objective = obj;
      out.converged = true;
      return out;
    }
    prev = obj;
    out.objective = obj;

    // CM step for weights, locations and scales with expected precisions
    for (std::size_t k = 0; k < K; ++k) {
      auto& c = model.components[k];
      const double r = *c.shape;
      double sg = 0.0, sgu = 0.0, sgud = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double g = v[j] * resp[j * K + k];
        const double z = (data[j] - c.location) / c.scale;
        const double u = (r + 1.0) / (r + z * z);
        sg += g;
        sgu += g * u;
        sgud += g * u * data[j];
      }
      if (sg <= 1e-300) {
        c.weight = 0.0;
        continue;
      }
      const double a = sgud / sgu;
      double sv = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double g = v[j] * resp[j * K + k];
        const double z = (data[j] - c.location) / c.scale;
        const double u = (r + 1.0) / (r + z * z);
        sv += g * u * (data[j] - a) * (data[j] - a);
      }
      double b = std::sqrt(sv / sg);
      if (b < floor) {
        b = floor;
        ++out.floored;
      }
      c.weight = sg / vsum;
      c.location = a;
      c.scale = b;
    }

    // profile search over each shape, accepting only improvements
    for (std::size_t k = 0; k < K; ++k) fill_column(k);
    for (std::size_t k = 0; k < K; ++k) {
      auto& c = model.components[k];
      if (c.weight <= 0.0) continue;
      const double lw = std::log(c.weight);
      const double lb = std::log(c.scale);
      std::vector<double> zsq(n);
      for (std::size_t j = 0; j < n; ++j) {
        const double z = (data[j] - c.location) / c.scale;
        zsq[j] = z * z;
      }
      auto profile = [&](double r) {
        const double cr = std::lgamma(0.5 * (r + 1.0)) - std::lgamma(0.5 * r) -
                          0.5 * std::log(r * kPi);
        double obj_r = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double cand = lw - lb + cr - 0.5 * (r + 1.0) * std::log1p(zsq[j] / r);
          double mx = cand;
          for (std::size_t q = 0; q < K; ++q)
            if (q != k) mx = std::max(mx, comp_log[j * K + q]);
          double s = std::exp(cand - mx);
          for (std::size_t q = 0; q < K; ++q)
            if (q != k) s += std::exp(comp_log[j * K + q] - mx);
          obj_r += v[j] * (mx + std::log(s));
        }
        return obj_r;
      };
      const double r_best = golden_max(profile, cfg.student_shape_min, cfg.student_shape_max);
      if (profile(r_best) > profile(*c.shape)) {
        c.shape = r_best;
        fill_column(k);
      }
    }
  }
  out.objective = objective_rows();
  return out;
}

/// Packing between mixture parameters and the unconstrained optimizer
/// vector: weights through a softmax, scales through exp, Student shapes
/// through a bounded sigmoid.
struct ParamPack {
  KernelFamily family = KernelFamily::normal;
  std::size_t K = 1;
  double rmin = 0.5, rmax = 200.0;

  std::size_t dim() const { return (family == KernelFamily::student ? 4 : 3) * K; }

  std::vector<double> to_vector(const MixtureModel& m) const {
    std::vector<double> x(dim());
    for (std::size_t k = 0; k < K; ++k) {
      x[k] = std::log(std::max(m.components[k].weight, 1e-12));
      x[K + k] = m.components[k].location;
      x[2 * K + k] = std::log(m.components[k].scale);
      if (family == KernelFamily::student) {
        const double t =
            std::clamp((m.components[k].shape.value_or(5.0) - rmin) / (rmax - rmin),
                       1e-6, 1.0 - 1e-6);
        x[3 * K + k] = std::log(t / (1.0 - t));
      }
    }
    return x;
  }

  MixtureModel to_model(std::span<const double> x) const {
    MixtureModel m;
    m.family = family;
    m.components.resize(K);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) mx = std::max(mx, x[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) sum += std::exp(x[k] - mx);
    for (std::size_t k = 0; k < K; ++k) {
      auto& c = m.components[k];
      c.weight = std::exp(x[k] - mx) / sum;
      c.location = x[K + k];
      c.scale = std::exp(std::clamp(x[2 * K + k], -300.0, 300.0));
      if (family == KernelFamily::student) {
        const double t = 1.0 / (1.0 + std::exp(-x[3 * K + k]));
        c.shape = rmin + (rmax - rmin) * t;
      }
    }
    return m;
  }
};

/// Quasi-Newton maximization of the weighted log-likelihood in the softmax /
/// exp reparameterization. Used for logistic mixtures, where no closed M
/// step exists.
inline WindowEstimate mle_fit_quasi_newton(const WindowView& w, const SeparationConfig& cfg,
                                           MixtureModel init) {
  const std::size_t n = w.width();
  const std::vector<double> v = window_weights(cfg, n);
  ParamPack pack{cfg.family, cfg.K, cfg.student_shape_min, cfg.student_shape_max};
  const Objective obj = [&](std::span<const double> x) {
    const MixtureModel m = pack.to_model(x);
    return -weighted_loglik(m, w.values, v);
  };
  OptimOptions opts;
  opts.max_iter = cfg.max_iter;
  opts.tol = cfg.tol;
  OptimResult r = lbfgs_minimize(obj, pack.to_vector(init), opts);
  WindowEstimate est;
  est.index = w.last_index;
  est.model = pack.to_model(r.x);
  est.iterations = r.iterations;
  est.converged = r.converged;
  est.loglik = -r.value;
  est.l2 = l2_discrepancy(est.model, make_l2_problem(w, cfg));
  return est;
}

}  // namespace detail

/// Weighted likelihood maximization on one window. Normal mixtures use exact
/// weighted E/M steps, Student mixtures the latent-scale ECM, and logistic
/// mixtures route to the reparameterized quasi-Newton maximizer.
inline WindowEstimate em_fit(const WindowView& w, const SeparationConfig& cfg,
                             const std::optional<MixtureModel>& init = {}) {
  detail::check_fit_preconditions(w, cfg);
  const double sd = detail::sample_std(w.values);
  if (!(sd > 0.0))
    throw std::runtime_error("degenerate window: all observations identical");
  MixtureModel model = detail::initial_model(w, cfg, init);
  if (cfg.family == KernelFamily::logistic)
    return detail::mle_fit_quasi_newton(w, cfg, std::move(model));

  const std::size_t n = w.width();
  const std::vector<double> v = window_weights(cfg, n);
  const double vsum = std::accumulate(v.begin(), v.end(), 0.0);
  const double floor = cfg.scale_floor_factor * sd;
  std::vector<double> sorted(w.values.begin(), w.values.end());
  std::sort(sorted.begin(), sorted.end());

  WindowEstimate est;
  est.index = w.last_index;
  std::vector<double>* trace = cfg.record_trace ? &est.trace : nullptr;

  std::size_t budget = cfg.max_iter;
  for (int phase = 0; phase < 3; ++phase) {
    detail::EmPhaseResult ph;
    if (cfg.family == KernelFamily::normal)
      ph = detail::em_phase_normal(model, w.values, v, vsum, floor, cfg, budget, trace);
    else
      ph = detail::em_phase_student(model, w.values, v, vsum, floor, cfg, budget, trace);
    est.iterations += ph.iterations;
    est.converged = ph.converged;
    est.floored += ph.floored;
    budget -= std::min(budget, ph.iterations);
    const int merged = detail::merge_collapsed(model, sorted, sd);
    if (merged == 0 || budget == 0) break;
    est.merged += merged;
  }
  detail::renormalize_weights(model);
  est.model = std::move(model);
  est.loglik = weighted_loglik(est.model, w.values, v);
  est.l2 = l2_discrepancy(est.model, make_l2_problem(w, cfg));
  return est;
}

namespace detail {

inline WindowEstimate fit_discrepancy(const WindowView& w, const SeparationConfig& cfg,
                                      const std::optional<MixtureModel>& init,
                                      double lambda) {
  check_fit_preconditions(w, cfg);
  const std::size_t n = w.width();
  const std::size_t M = effective_grid_size(cfg, n);
  if (M + 1 < 3 * cfg.K)
    throw std::invalid_argument("grid size M must be at least 3K-1");
  const double sd = sample_std(w.values);
  if (!(sd > 0.0))
    throw std::runtime_error("degenerate window: all observations identical");
  if (lambda < 0.0) throw std::invalid_argument("hybrid lambda must be nonnegative");

  const L2Problem prob = make_l2_problem(w, cfg);
  const std::vector<double> v = window_weights(cfg, n);
  ParamPack pack{cfg.family, cfg.K, cfg.student_shape_min, cfg.student_shape_max};

  const Objective obj = [&](std::span<const double> x) {
    const MixtureModel m = pack.to_model(x);
    double f = l2_discrepancy(m, prob);
    if (lambda > 0.0)
      f -= lambda * weighted_loglik(m, w.values, v) / static_cast<double>(n);
    return f;
  };

  // The discrepancy surface is multimodal; descend from a deterministic
  // family of starts and keep the best minimizer. The likelihood pilot keeps
  // (almost) the EM likelihood while cutting the discrepancy.
  std::vector<MixtureModel> starts;
  starts.push_back(initial_model(w, cfg, init));
  starts.push_back(em_fit(w, cfg, init).model);
  {
    MixtureModel spread = starts.front();
    for (auto& c : spread.components) c.scale *= 3.0;
    starts.push_back(std::move(spread));
  }

  OptimOptions opts;
  opts.max_iter = cfg.max_iter;
  opts.tol = cfg.tol;
  OptimResult r;
  std::size_t total_iters = 0;
  for (const MixtureModel& s : starts) {
    OptimResult cand = lbfgs_minimize(obj, pack.to_vector(s), opts);
    total_iters += cand.iterations;
    if (cand.value < r.value) r = std::move(cand);
  }
  // one polish pass with fresh curvature shaves the tail of the descent
  OptimResult r2 = lbfgs_minimize(obj, r.x, opts);
  total_iters += r2.iterations;
  if (r2.value < r.value) r = std::move(r2);
  r.iterations = total_iters;

  WindowEstimate est;
  est.index = w.last_index;
  est.model = pack.to_model(r.x);
  const double floor = cfg.scale_floor_factor * sd;
  for (auto& c : est.model.components)
    if (c.scale < floor) {
      c.scale = floor;
      ++est.floored;
    }
  est.iterations = r.iterations;
  est.converged = r.converged;
  est.l2 = l2_discrepancy(est.model, prob);
  est.loglik = weighted_loglik(est.model, w.values, v);
  return est;
}

}  // namespace detail

/// Constrained l2-discrepancy minimization on the order-statistic grid,
/// solved as unconstrained smooth minimization after reparameterization.
inline WindowEstimate l2_fit(const WindowView& w, const SeparationConfig& cfg,
                             const std::optional<MixtureModel>& init = {}) {
  return detail::fit_discrepancy(w, cfg, init, 0.0);
}

/// Penalized l2 distance with the weighted log-likelihood as the penalty;
/// lambda = 0 reduces exactly to l2_fit.
inline WindowEstimate hybrid_fit(const WindowView& w, const SeparationConfig& cfg,
                                 const std::optional<MixtureModel>& init = {}) {
  return detail::fit_discrepancy(w, cfg, init, cfg.lambda);
}

namespace detail {

inline WindowEstimate fit_window(const WindowView& w, const SeparationConfig& cfg,
                                 const std::optional<MixtureModel>& init) {
  switch (cfg.method) {
    case FitMethod::em: return em_fit(w, cfg, init);
    case FitMethod::l2: return l2_fit(w, cfg, init);
    case FitMethod::hybrid: return hybrid_fit(w, cfg, init);
  }
  return em_fit(w, cfg, init);
}

}  // namespace detail

/// Moving separation of mixtures: slides a width-n window along the series
/// (the caller supplies the increment series), warm-starting every window
/// from the previous solution. A window that fails numerically carries
/// converged=false and the chain continues from the last good model; a hard
/// failure on the first window propagates.
inline std::vector<WindowEstimate> msm_run(const TimeSeries& series, std::size_t n,
                                           std::size_t stride, const SeparationConfig& cfg) {
  std::vector<WindowEstimate> out;
  std::optional<MixtureModel> warm;
  for (const WindowView w : windows(series, n, stride)) {
    try {
      WindowEstimate est = detail::fit_window(w, cfg, warm);
      warm = est.model;
      out.push_back(std::move(est));
    } catch (const std::runtime_error&) {
      if (!warm) throw;
      WindowEstimate est;
      est.index = w.last_index;
      est.model = *warm;
      est.loglik = std::numeric_limits<double>::quiet_NaN();
      est.l2 = std::numeric_limits<double>::quiet_NaN();
      est.converged = false;
      out.push_back(std::move(est));
    }
  }
  return out;
}

}  // namespace msm
