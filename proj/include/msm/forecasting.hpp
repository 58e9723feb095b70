#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "msm/reconstruction.hpp"
#include "msm/separation.hpp"
#include "msm/series.hpp"
#include "msm/weighting.hpp"

namespace msm {

enum class ForecastScheme { ar, var, taylor1, taylor2 };

inline std::string to_string(ForecastScheme s) {
  switch (s) {
    case ForecastScheme::ar: return "ar";
    case ForecastScheme::var: return "var";
    case ForecastScheme::taylor1: return "taylor1";
    case ForecastScheme::taylor2: return "taylor2";
  }
  return "ar";
}

inline ForecastScheme forecast_scheme_from_string(const std::string& s) {
  if (s == "ar") return ForecastScheme::ar;
  if (s == "var") return ForecastScheme::var;
  if (s == "taylor1") return ForecastScheme::taylor1;
  if (s == "taylor2") return ForecastScheme::taylor2;
  throw std::invalid_argument("unknown forecast scheme: " + s);
}

struct PredictorSpec {
  ForecastScheme scheme = ForecastScheme::ar;
  std::size_t p = 1;
  std::size_t fit_window = 50;
  WeightScheme ls_weights;  // row weights for the per-step least squares
  bool intercept = true;
};

inline std::size_t regressors_per_lag(ForecastScheme s) {
  switch (s) {
    case ForecastScheme::ar: return 1;
    case ForecastScheme::taylor1: return 2;
    case ForecastScheme::var:
    case ForecastScheme::taylor2: return 3;
  }
  return 1;
}

struct ScoreMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  double dir = 0.0;  // percentage of correctly predicted directions
  std::size_t count = 0;
};

/// MAE, RMSE and DIR. Directions compare sign(pred - prev) with
/// sign(true - prev) where sign is in {-1, 0, +1}; two zero moves match.
inline ScoreMetrics score(std::span<const double> y_true, std::span<const double> y_pred,
                          std::span<const double> y_prev) {
  if (y_true.size() != y_pred.size() || y_true.size() != y_prev.size())
    throw std::invalid_argument("score: length mismatch");
  if (y_true.empty()) throw std::invalid_argument("score: empty input");
  auto sgn = [](double v) { return (v > 0.0) - (v < 0.0); };
  double abs_sum = 0.0, sq_sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double e = y_true[i] - y_pred[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    if (sgn(y_pred[i] - y_prev[i]) == sgn(y_true[i] - y_prev[i])) ++hits;
  }
  const auto n = static_cast<double>(y_true.size());
  ScoreMetrics m;
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);
  m.dir = 100.0 * static_cast<double>(hits) / n;
  m.count = y_true.size();
  return m;
}

struct StepFit {
  Eigen::MatrixXd coeffs;           // one column per target channel
  Eigen::RowVectorXd predictions;   // for the supplied next regressor row
  Eigen::Index rank = 0;
};

/// One (weighted) least-squares fit and one-step prediction. The normal
/// equations are solved through a rank-revealing complete orthogonal
/// decomposition; rank-deficient systems get the minimum-norm solution.
/// The intercept column, when enabled, is appended last.
inline StepFit fit_predict_step(const Eigen::MatrixXd& regressors,
                                const Eigen::MatrixXd& targets,
                                const Eigen::RowVectorXd& next_regressors,
                                const PredictorSpec& spec) {
  const Eigen::Index rows = regressors.rows();
  const Eigen::Index nreg = regressors.cols();
  if (rows != targets.rows()) throw std::invalid_argument("regressor/target row mismatch");
  if (next_regressors.cols() != nreg)
    throw std::invalid_argument("next regressor width mismatch");
  const Eigen::Index ncol = nreg + (spec.intercept ? 1 : 0);
  if (rows < ncol) throw std::invalid_argument("not enough rows for the regression");
  if (regressors.squaredNorm() == 0.0 && !spec.intercept)
    throw std::invalid_argument("all-zero regressors");

  Eigen::MatrixXd A(rows, ncol);
  A.leftCols(nreg) = regressors;
  if (spec.intercept) A.col(ncol - 1).setOnes();
  Eigen::MatrixXd B = targets;

  // uniform weights stay unscaled so WLS is bit-identical to OLS there
  if (!spec.ls_weights.is_uniform()) {
    const std::vector<double> w = weights(spec.ls_weights, static_cast<std::size_t>(rows));
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double sq = std::sqrt(w[static_cast<std::size_t>(r)]);
      A.row(r) *= sq;
      B.row(r) *= sq;
    }
  }

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(1e-10);
  cod.compute(A);
  StepFit fit;
  fit.coeffs = cod.solve(B);
  fit.rank = cod.rank();
  Eigen::RowVectorXd xn(ncol);
  xn.leftCols(nreg) = next_regressors;
  if (spec.intercept) xn(ncol - 1) = 1.0;
  fit.predictions = xn * fit.coeffs;
  return fit;
}

struct PredictionReport {
  std::vector<std::size_t> target_indices;  // 1-based index of the predicted element
  std::vector<double> predictions;
  std::vector<double> actuals;
  double mae = 0.0;
  double rmse = 0.0;
  double dir = 0.0;
  std::size_t n_predictions = 0;
};

/// Feature/reconstruction stage driving the forecaster. `n` is the
/// separation / binning window width; estimates are refreshed every `stride`
/// steps and carried forward in between.
struct ForecastPipeline {
  std::size_t n = 50;
  std::size_t stride = 1;
  SeparationConfig separation;
  UniformEstimator uniform_estimator = UniformEstimator::mean;
  BinMode bin_mode = BinMode::Q;
  std::size_t bins_J = 9;
  DriftEstimator drift_estimator = DriftEstimator::avg;
  bool fit_bins = false;  // mixture fit inside state bins (taylor mode/variance)
};

/// Rolling one-step-ahead forecast. Regressors for origin i use data up to
/// index i only; coefficients are refit on the trailing fit_window rows at
/// every step.
inline PredictionReport rolling_forecast(const TimeSeries& series, const PredictorSpec& spec,
                                         const ForecastPipeline& pipe) {
  validate_series(series);
  const std::size_t N = series.size();
  const std::size_t p = spec.p;
  if (p < 1) throw std::invalid_argument("autoregression order must be >= 1");
  const std::size_t per_lag = regressors_per_lag(spec.scheme);
  const std::size_t nreg = per_lag * p;
  const std::size_t ncoef = nreg + (spec.intercept ? 1 : 0);
  if (spec.fit_window < ncoef + 2)
    throw std::invalid_argument("fit_window must be at least #coefficients + 2");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> X(N + 1, nan);
  for (std::size_t i = 0; i < N; ++i) X[i + 1] = series.values[i];
  std::vector<double> A, B, D1, D2;

  if (spec.scheme == ForecastScheme::var) {
    if (N < pipe.n + 2) throw std::invalid_argument("series shorter than the pipeline warm-up");
    const TimeSeries incs = increments(series);
    const auto estimates = msm_run(incs, pipe.n, pipe.stride, pipe.separation);
    const CoefficientSeries co = uniform_reconstruct(estimates, pipe.uniform_estimator);
    A.assign(N + 1, nan);
    B.assign(N + 1, nan);
    std::size_t e = 0;
    double ca = nan, cb = nan;
    for (std::size_t t = 1; t <= N; ++t) {
      // an estimate over increments ending at m uses observations up to m+1
      while (e < co.indices.size() && co.indices[e] + 1 <= t) {
        ca = co.a_bar[e];
        cb = co.b_bar[e];
        ++e;
      }
      A[t] = ca;
      B[t] = cb;
    }
  }

  if (spec.scheme == ForecastScheme::taylor1 || spec.scheme == ForecastScheme::taylor2) {
    if (N < pipe.n + 1) throw std::invalid_argument("series shorter than the pipeline warm-up");
    const std::optional<SeparationConfig> bin_fit =
        pipe.fit_bins ? std::optional<SeparationConfig>(pipe.separation) : std::nullopt;
    std::vector<NonUniformEstimate> level1;
    for (const WindowView w : windows(series, pipe.n, pipe.stride))
      level1.push_back(nonuniform_estimate_for_window(w, pipe.bin_mode, pipe.bins_J,
                                                      pipe.drift_estimator, bin_fit));
    D1.assign(N + 1, nan);
    {
      std::size_t e = 0;
      const NonUniformEstimate* cur = nullptr;
      for (std::size_t t = 1; t <= N; ++t) {
        while (e < level1.size() && level1[e].index <= t) cur = &level1[e++];
        if (cur) D1[t] = alpha_at(*cur, X[t]);
      }
    }
    if (spec.scheme == ForecastScheme::taylor2) {
      if (N < 2 * pipe.n) throw std::invalid_argument("taylor2 needs at least 2n observations");
      const auto level2 =
          second_level(series, level1, pipe.n, pipe.bin_mode, pipe.bins_J,
                       pipe.drift_estimator, bin_fit);
      D2.assign(N + 1, nan);
      std::size_t e = 0;
      const NonUniformEstimate* cur = nullptr;
      for (std::size_t t = 1; t <= N; ++t) {
        while (e < level2.size() && level2[e].index <= t) cur = &level2[e++];
        if (cur && std::isfinite(D1[t])) D2[t] = alpha_at(*cur, D1[t]);
      }
    }
  }

  auto have = [&](std::size_t t) -> bool {
    if (t < p) return false;
    for (std::size_t k = 0; k < p; ++k) {
      const std::size_t idx = t - k;
      switch (spec.scheme) {
        case ForecastScheme::ar: break;
        case ForecastScheme::var:
          if (!std::isfinite(A[idx]) || !std::isfinite(B[idx])) return false;
          break;
        case ForecastScheme::taylor1:
          if (!std::isfinite(D1[idx])) return false;
          break;
        case ForecastScheme::taylor2:
          if (!std::isfinite(D1[idx]) || !std::isfinite(D2[idx])) return false;
          break;
      }
    }
    return true;
  };
  auto target_ok = [&](std::size_t t1) -> bool {
    if (spec.scheme == ForecastScheme::var)
      return std::isfinite(A[t1]) && std::isfinite(B[t1]);
    return true;
  };
  auto fill_row = [&](std::size_t t, Eigen::RowVectorXd& out) {
    Eigen::Index c = 0;
    for (std::size_t k = 0; k < p; ++k) {
      const std::size_t idx = t - k;
      out(c++) = X[idx];
      if (spec.scheme == ForecastScheme::var) {
        out(c++) = A[idx];
        out(c++) = B[idx];
      } else if (spec.scheme == ForecastScheme::taylor1) {
        out(c++) = D1[idx];
      } else if (spec.scheme == ForecastScheme::taylor2) {
        out(c++) = D1[idx];
        out(c++) = D2[idx];
      }
    }
  };

  std::size_t first_origin = 0;
  for (std::size_t t = 1; t + 1 <= N; ++t)
    if (have(t) && target_ok(t + 1)) {
      first_origin = t;
      break;
    }
  if (first_origin == 0)
    throw std::invalid_argument("series too short for the pipeline warm-up");

  const std::size_t fw = spec.fit_window;
  const std::size_t tcols = spec.scheme == ForecastScheme::var ? 3 : 1;
  Eigen::MatrixXd regressors(fw, nreg);
  Eigen::MatrixXd targets(fw, tcols);
  Eigen::RowVectorXd row(nreg);

  PredictionReport rep;
  std::vector<double> prevs;
  for (std::size_t i = first_origin + fw; i + 1 <= N; ++i) {
    bool ok = have(i);
    for (std::size_t r = 0; r < fw && ok; ++r) {
      const std::size_t s = i - fw + r;
      ok = have(s) && target_ok(s + 1);
    }
    if (!ok) continue;
    for (std::size_t r = 0; r < fw; ++r) {
      const std::size_t s = i - fw + r;
      fill_row(s, row);
      regressors.row(static_cast<Eigen::Index>(r)) = row;
      targets(static_cast<Eigen::Index>(r), 0) = X[s + 1];
      if (tcols == 3) {
        targets(static_cast<Eigen::Index>(r), 1) = A[s + 1];
        targets(static_cast<Eigen::Index>(r), 2) = B[s + 1];
      }
    }
    fill_row(i, row);
    const StepFit fit = fit_predict_step(regressors, targets, row, spec);
    rep.target_indices.push_back(i + 1);
    rep.predictions.push_back(fit.predictions(0));
    rep.actuals.push_back(X[i + 1]);
    prevs.push_back(X[i]);
  }
  if (rep.predictions.empty())
    throw std::invalid_argument("series too short for the pipeline warm-up");
  const ScoreMetrics m = score(rep.actuals, rep.predictions, prevs);
  rep.mae = m.mae;
  rep.rmse = m.rmse;
  rep.dir = m.dir;
  rep.n_predictions = m.count;
  return rep;
}

}  // namespace msm
