// Command-line front end: simulate | fit | reconstruct | features | predict | sweep.
// Exit codes: 0 ok, 2 usage/input error, 3 numerical failure.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "msm/msm.hpp"

namespace {

using namespace msm;

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

std::vector<std::string> parse_string_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

/// Options shared by every subcommand that reads a series.
struct InputOptions {
  std::string path;
  std::string column = "0";
  std::optional<double> sentinel;
  std::string delimiter = ",";
  std::size_t smooth_block = 0;
  bool take_increments = false;
};

void add_input_options(CLI::App* cmd, InputOptions& in, bool increments_default) {
  in.take_increments = increments_default;
  cmd->add_option("--input", in.path, "Input CSV file")->required();
  cmd->add_option("--column", in.column, "Value column: 0-based index or header name");
  cmd->add_option("--sentinel", in.sentinel, "Missing-value sentinel (exact match)");
  cmd->add_option("--delimiter", in.delimiter, "Field delimiter; ' ' splits on blanks");
  cmd->add_option("--smooth", in.smooth_block, "Block smoothing: 0 (off), 2 or 4");
  cmd->add_flag("--increments,!--no-increments", in.take_increments,
                "Difference the series before the analysis");
}

TimeSeries read_series(const InputOptions& in) {
  CsvOptions opts;
  opts.delimiter = in.delimiter.empty() ? ',' : in.delimiter[0];
  TimeSeries s = load_csv(in.path, in.column, in.sentinel, opts);
  if (in.smooth_block != 0) s = smooth(s, in.smooth_block);
  if (in.take_increments) s = increments(s);
  validate_series(s);
  return s;
}

/// Options shared by the mixture-fitting subcommands.
struct FitOptions {
  std::string kernel = "normal";
  std::size_t K = 3;
  std::string method = "em";
  double lambda = 1.0;
  std::string weighting = "uniform";
  bool weighted_l2 = false;
  std::size_t grid_M = 0;
  std::size_t max_iter = 500;
  double tol = 1e-8;
};

void add_fit_options(CLI::App* cmd, FitOptions& fo) {
  cmd->add_option("--kernel", fo.kernel, "Kernel family: normal|student|logistic");
  cmd->add_option("--K", fo.K, "Number of mixture components");
  cmd->add_option("--method", fo.method, "Separation method: em|l2|hybrid");
  cmd->add_option("--lambda", fo.lambda, "Hybrid log-likelihood penalty weight");
  cmd->add_option("--weighting", fo.weighting,
                  "Window weights: uniform|exp:<p>|linear|calibrated:<m>");
  cmd->add_flag("--weighted-l2", fo.weighted_l2, "Weight the l2 terms by the scheme");
  cmd->add_option("--M", fo.grid_M, "l2 grid size (0 = default)");
  cmd->add_option("--max-iter", fo.max_iter, "Iteration cap per window");
  cmd->add_option("--tol", fo.tol, "Relative objective-change tolerance");
}

SeparationConfig make_separation_config(const FitOptions& fo, const TimeSeries& series,
                                        std::uint64_t seed) {
  SeparationConfig cfg;
  cfg.family = kernel_family_from_string(fo.kernel);
  cfg.K = fo.K;
  cfg.method = fit_method_from_string(fo.method);
  cfg.lambda = fo.lambda;
  cfg.weight_scheme = resolve_weight_scheme(parse_weight_scheme(fo.weighting), series);
  cfg.weighted_l2_terms = fo.weighted_l2;
  cfg.grid_size_M = fo.grid_M;
  cfg.max_iter = fo.max_iter;
  cfg.tol = fo.tol;
  cfg.seed = seed;
  return cfg;
}

int cmd_simulate(const std::string& kind, std::size_t length, std::uint64_t seed, double x0,
                 double dt, double drift, double sigma, double theta,
                 const std::string& mixture, const std::string& seg_drift,
                 const std::string& seg_sigma, const std::string& out) {
  SyntheticSpec spec;
  spec.kind = synthetic_kind_from_string(kind);
  spec.length = length;
  spec.seed = seed;
  spec.x0 = x0;
  spec.dt = dt;
  spec.drift = drift;
  spec.sigma = sigma;
  spec.theta = theta;
  if (!mixture.empty()) spec.mixture = model_from_record(mixture);
  if (!seg_drift.empty()) spec.seg_drift = parse_double_list(seg_drift);
  if (!seg_sigma.empty()) spec.seg_sigma = parse_double_list(seg_sigma);
  const TimeSeries series = simulate(spec);
  save_series_csv(out, series);
  return 0;
}

struct PredictSetup {
  PredictorSpec spec;
  ForecastPipeline pipe;
};

PredictSetup make_predict_setup(const TimeSeries& series, const std::string& scheme,
                                std::size_t p, std::size_t window, std::size_t fit_window,
                                std::size_t stride, const FitOptions& fo,
                                const std::string& ls_weighting, bool intercept,
                                const std::string& estimator,
                                const std::string& drift_estimator,
                                const std::string& bin_mode, std::size_t J, bool fit_bins,
                                std::uint64_t seed) {
  PredictSetup s;
  s.spec.scheme = forecast_scheme_from_string(scheme);
  s.spec.p = p;
  s.spec.fit_window = fit_window == 0 ? window : fit_window;
  s.spec.ls_weights = resolve_weight_scheme(parse_weight_scheme(ls_weighting), series);
  s.spec.intercept = intercept;
  s.pipe.n = window;
  s.pipe.stride = stride;
  s.pipe.separation = make_separation_config(fo, series, seed);
  s.pipe.uniform_estimator = uniform_estimator_from_string(estimator);
  s.pipe.bin_mode = bin_mode_from_string(bin_mode);
  s.pipe.bins_J = J;
  s.pipe.drift_estimator = drift_estimator_from_string(drift_estimator);
  s.pipe.fit_bins = fit_bins;
  return s;
}

ReportRow make_report_row(const PredictSetup& s, const PredictionReport& rep,
                          const FitOptions& fo, const std::string& ls_weighting) {
  ReportRow row;
  row.scheme = to_string(s.spec.scheme) + "(" + std::to_string(s.spec.p) + ")";
  const bool uses_fit = s.spec.scheme == ForecastScheme::var ||
                        ((s.spec.scheme == ForecastScheme::taylor1 ||
                          s.spec.scheme == ForecastScheme::taylor2) &&
                         s.pipe.fit_bins);
  row.window = s.spec.scheme == ForecastScheme::ar ? s.spec.fit_window : s.pipe.n;
  row.kernel = uses_fit ? fo.kernel : "-";
  row.K = uses_fit ? std::to_string(fo.K) : "-";
  row.weighting = uses_fit ? fo.weighting : ls_weighting;
  switch (s.spec.scheme) {
    case ForecastScheme::ar: row.estimator = "-"; break;
    case ForecastScheme::var: row.estimator = to_string(s.pipe.uniform_estimator); break;
    default:
      row.estimator = to_string(s.pipe.bin_mode) + ":J=" + std::to_string(s.pipe.bins_J) +
                      ":" + to_string(s.pipe.drift_estimator);
      break;
  }
  row.mae = rep.mae;
  row.rmse = rep.rmse;
  row.dir = rep.dir;
  row.n_predictions = rep.n_predictions;
  return row;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent drift/diffusion features and rolling forecasts for time series"};
  app.set_config("--config", "", "Config file (key=value with [subcommand] sections)");
  app.require_subcommand(1);

  // ---- simulate ----
  std::string sim_kind = "brownian", sim_mixture, sim_seg_drift, sim_seg_sigma,
              sim_out = "series.csv";
  std::size_t sim_length = 1000;
  std::uint64_t sim_seed = 0;
  double sim_x0 = 0.0, sim_dt = 1.0, sim_drift = 0.0, sim_sigma = 1.0, sim_theta = 1.0;
  CLI::App* sim = app.add_subcommand("simulate", "Generate a synthetic series");
  sim->add_option("--kind", sim_kind, "brownian|ou|gbm|mixture_iid|piecewise_ito");
  sim->add_option("--length", sim_length, "Number of observations")->required();
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_option("--x0", sim_x0, "Initial value");
  sim->add_option("--dt", sim_dt, "Time step");
  sim->add_option("--drift", sim_drift, "Drift rate (brownian/gbm)");
  sim->add_option("--sigma", sim_sigma, "Diffusion scale");
  sim->add_option("--theta", sim_theta, "Mean-reversion speed (ou)");
  sim->add_option("--mixture", sim_mixture, "Mixture record for mixture_iid");
  sim->add_option("--seg-drift", sim_seg_drift, "piecewise_ito drifts, comma separated");
  sim->add_option("--seg-sigma", sim_seg_sigma, "piecewise_ito sigmas, comma separated");
  sim->add_option("--out", sim_out, "Output CSV path");

  // ---- fit ----
  InputOptions fit_in;
  FitOptions fit_fo;
  std::size_t fit_window = 50, fit_stride = 1;
  std::uint64_t fit_seed = 0;
  std::string fit_out = "estimates.csv";
  CLI::App* fit = app.add_subcommand("fit", "Moving separation of mixtures");
  add_input_options(fit, fit_in, true);
  add_fit_options(fit, fit_fo);
  fit->add_option("--window", fit_window, "Window width n");
  fit->add_option("--stride", fit_stride, "Window stride");
  fit->add_option("--seed", fit_seed, "Seed recorded into the run config");
  fit->add_option("--out", fit_out, "Per-window estimates CSV");

  // ---- reconstruct ----
  InputOptions rec_in;
  std::string rec_mode = "uniform", rec_estimates, rec_estimator = "mean";
  std::string rec_drift_estimator = "avg", rec_bin_mode = "Q";
  std::size_t rec_window = 50, rec_stride = 1, rec_J = 9;
  bool rec_second = false;
  std::string rec_out = "coefficients.csv";
  CLI::App* rec = app.add_subcommand("reconstruct", "Coefficient reconstruction");
  rec->add_option("--mode", rec_mode, "uniform|nonuniform");
  rec->add_option("--from-estimates", rec_estimates, "Estimates CSV (uniform mode)");
  rec->add_option("--estimator", rec_estimator, "Uniform estimator: mean|median|mode");
  add_input_options(rec, rec_in, false);
  rec->get_option("--input")->required(false);
  rec->add_option("--window", rec_window, "Window width (nonuniform)");
  rec->add_option("--stride", rec_stride, "Window stride (nonuniform)");
  rec->add_option("--bin-mode", rec_bin_mode, "U (equal length) | Q (equiprobable)");
  rec->add_option("--J", rec_J, "Number of state bins");
  rec->add_option("--drift-estimator", rec_drift_estimator, "avg|mode|med");
  rec->add_flag("--second-level", rec_second, "Also emit the second-level series");
  rec->add_option("--out", rec_out, "Output CSV");

  // ---- features ----
  InputOptions feat_in;
  std::string feat_kind = "cdf_grid", feat_estimates, feat_grid, feat_levels;
  std::size_t feat_M = 10, feat_window = 50;
  std::string feat_out = "features.csv";
  CLI::App* feat = app.add_subcommand("features", "Feature-space extensions");
  feat->add_option("--kind", feat_kind, "cdf_grid|quantile|order_stat");
  feat->add_option("--from-estimates", feat_estimates, "Estimates CSV (cdf_grid/quantile)");
  feat->add_option("--grid", feat_grid, "Explicit grid, comma separated (cdf_grid)");
  feat->add_option("--levels", feat_levels, "Probability levels (quantile)");
  feat->add_option("--M", feat_M, "Feature dimension");
  add_input_options(feat, feat_in, false);
  feat->get_option("--input")->required(false);
  feat->add_option("--window", feat_window, "Window width (order_stat)");
  feat->add_option("--out", feat_out, "Output CSV");

  // ---- predict ----
  InputOptions pred_in;
  FitOptions pred_fo;
  std::string pred_scheme = "ar", pred_ls_weighting = "uniform", pred_estimator = "mean";
  std::string pred_drift_estimator = "avg", pred_bin_mode = "Q";
  std::size_t pred_p = 1, pred_window = 50, pred_fit_window = 0, pred_stride = 1, pred_J = 9;
  bool pred_intercept = true, pred_fit_bins = false;
  std::uint64_t pred_seed = 0;
  std::string pred_out = "report.csv", pred_steps, pred_plot;
  CLI::App* pred = app.add_subcommand("predict", "Rolling one-step forecast");
  add_input_options(pred, pred_in, false);
  add_fit_options(pred, pred_fo);
  pred->add_option("--scheme", pred_scheme, "ar|var|taylor1|taylor2");
  pred->add_option("--p", pred_p, "Autoregression order");
  pred->add_option("--window", pred_window, "Separation/binning window width n");
  pred->add_option("--fit-window", pred_fit_window, "Regression window (default: n)");
  pred->add_option("--stride", pred_stride, "Re-estimation stride");
  pred->add_option("--ls-weighting", pred_ls_weighting, "Least-squares row weights");
  pred->add_flag("--intercept,!--no-intercept", pred_intercept, "Include an intercept");
  pred->add_option("--estimator", pred_estimator, "Uniform estimator for var channels");
  pred->add_option("--drift-estimator", pred_drift_estimator, "avg|mode|med (taylor)");
  pred->add_option("--bin-mode", pred_bin_mode, "U|Q (taylor)");
  pred->add_option("--J", pred_J, "State bins (taylor)");
  pred->add_flag("--fit-bins", pred_fit_bins, "Fit mixtures inside state bins");
  pred->add_option("--seed", pred_seed, "Seed recorded into the run config");
  pred->add_option("--out", pred_out, "Report CSV");
  pred->add_option("--predictions", pred_steps, "Optional per-step predictions CSV");
  pred->add_option("--plot", pred_plot, "Optional SVG chart of actual vs predicted");

  // ---- sweep ----
  InputOptions sweep_in;
  FitOptions sweep_fo;
  std::string sweep_schemes = "ar", sweep_windows = "50", sweep_kernels = "normal",
              sweep_Ks = "3", sweep_weightings = "uniform", sweep_estimators = "mean";
  std::string sweep_ls_weighting = "uniform", sweep_bin_mode = "Q",
              sweep_drift_estimator = "avg";
  std::size_t sweep_p = 1, sweep_stride = 1, sweep_J = 9, sweep_fit_window = 0;
  std::uint64_t sweep_seed = 0;
  std::string sweep_out = "sweep.csv";
  CLI::App* sweep = app.add_subcommand("sweep", "Cartesian product of predict configs");
  add_input_options(sweep, sweep_in, false);
  add_fit_options(sweep, sweep_fo);
  sweep->add_option("--schemes", sweep_schemes, "Comma list of schemes");
  sweep->add_option("--windows", sweep_windows, "Comma list of window widths");
  sweep->add_option("--kernels", sweep_kernels, "Comma list of kernel families");
  sweep->add_option("--Ks", sweep_Ks, "Comma list of mixture orders");
  sweep->add_option("--weightings", sweep_weightings, "Comma list of weight schemes");
  sweep->add_option("--estimators", sweep_estimators, "Comma list of uniform estimators");
  sweep->add_option("--p", sweep_p, "Autoregression order");
  sweep->add_option("--fit-window", sweep_fit_window, "Regression window (default: n)");
  sweep->add_option("--stride", sweep_stride, "Re-estimation stride");
  sweep->add_option("--ls-weighting", sweep_ls_weighting, "Least-squares row weights");
  sweep->add_option("--bin-mode", sweep_bin_mode, "U|Q (taylor)");
  sweep->add_option("--J", sweep_J, "State bins (taylor)");
  sweep->add_option("--drift-estimator", sweep_drift_estimator, "avg|mode|med (taylor)");
  sweep->add_option("--seed", sweep_seed, "Seed recorded into the run config");
  sweep->add_option("--out", sweep_out, "Report CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(sim_kind, sim_length, sim_seed, sim_x0, sim_dt, sim_drift,
                          sim_sigma, sim_theta, sim_mixture, sim_seg_drift, sim_seg_sigma,
                          sim_out);
    }
    if (fit->parsed()) {
      const TimeSeries series = read_series(fit_in);
      const SeparationConfig cfg = make_separation_config(fit_fo, series, fit_seed);
      const auto estimates = msm_run(series, fit_window, fit_stride, cfg);
      save_estimates_csv(fit_out, estimates);
      return 0;
    }
    if (rec->parsed()) {
      if (rec_mode == "uniform") {
        if (rec_estimates.empty())
          throw std::invalid_argument("uniform reconstruction needs --from-estimates");
        const auto estimates = load_estimates_csv(rec_estimates);
        const CoefficientSeries co =
            uniform_reconstruct(estimates, uniform_estimator_from_string(rec_estimator));
        save_coefficients_csv(rec_out, co);
        return 0;
      }
      if (rec_mode != "nonuniform")
        throw std::invalid_argument("reconstruct mode must be uniform or nonuniform");
      if (rec_in.path.empty())
        throw std::invalid_argument("nonuniform reconstruction needs --input");
      const TimeSeries series = read_series(rec_in);
      const BinMode mode = bin_mode_from_string(rec_bin_mode);
      const DriftEstimator de = drift_estimator_from_string(rec_drift_estimator);
      std::vector<NonUniformEstimate> level1;
      for (const WindowView w : windows(series, rec_window, rec_stride))
        level1.push_back(nonuniform_estimate_for_window(w, mode, rec_J, de));
      if (rec_second) {
        const auto level2 = second_level(series, level1, rec_window, mode, rec_J, de);
        save_nonuniform_csv(rec_out, level2);
      } else {
        save_nonuniform_csv(rec_out, level1);
      }
      return 0;
    }
    if (feat->parsed()) {
      const FeatureKind kind = feature_kind_from_string(feat_kind);
      if (kind == FeatureKind::order_stat) {
        if (feat_in.path.empty()) throw std::invalid_argument("order_stat needs --input");
        const TimeSeries series = read_series(feat_in);
        const auto ranks = arithmetic_ranks(feat_window, feat_M);
        save_features_csv(feat_out, order_stat_features(series, feat_window, ranks));
        return 0;
      }
      if (feat_estimates.empty())
        throw std::invalid_argument(feat_kind + " features need --from-estimates");
      const auto estimates = load_estimates_csv(feat_estimates);
      if (kind == FeatureKind::cdf_grid) {
        std::vector<double> grid;
        if (!feat_grid.empty()) {
          grid = parse_double_list(feat_grid);
        } else {
          if (feat_in.path.empty())
            throw std::invalid_argument("cdf_grid needs --grid or --input for the default");
          grid = default_cdf_grid(read_series(feat_in), feat_M);
        }
        save_features_csv(feat_out, cdf_grid_features(estimates, grid));
      } else {
        const std::vector<double> levels =
            feat_levels.empty() ? decile_levels() : parse_double_list(feat_levels);
        save_features_csv(feat_out, quantile_features(estimates, levels));
      }
      return 0;
    }
    auto run_predict = [&](const InputOptions& in, const FitOptions& fo,
                           const std::string& scheme, std::size_t p, std::size_t window,
                           std::size_t fw, std::size_t stride, const std::string& lsw,
                           bool intercept, const std::string& estimator,
                           const std::string& drift_est, const std::string& bin_mode,
                           std::size_t J, bool fit_bins, std::uint64_t seed,
                           const TimeSeries& series) {
      const PredictSetup setup =
          make_predict_setup(series, scheme, p, window, fw, stride, fo, lsw, intercept,
                             estimator, drift_est, bin_mode, J, fit_bins, seed);
      const PredictionReport rep = rolling_forecast(series, setup.spec, setup.pipe);
      return std::make_pair(setup, rep);
    };
    if (pred->parsed()) {
      const TimeSeries series = read_series(pred_in);
      const auto [setup, rep] =
          run_predict(pred_in, pred_fo, pred_scheme, pred_p, pred_window, pred_fit_window,
                      pred_stride, pred_ls_weighting, pred_intercept, pred_estimator,
                      pred_drift_estimator, pred_bin_mode, pred_J, pred_fit_bins, pred_seed,
                      series);
      const ReportRow row = make_report_row(setup, rep, pred_fo, pred_ls_weighting);
      save_report_csv(pred_out, std::span<const ReportRow>(&row, 1));
      if (!pred_steps.empty()) save_predictions_csv(pred_steps, rep);
      if (!pred_plot.empty()) {
        const auto tail = static_cast<std::ptrdiff_t>(
            std::min<std::size_t>(rep.predictions.size(), 2000));
        SvgSeries actual{"actual",
                         std::vector<double>(rep.actuals.end() - tail, rep.actuals.end()),
                         "#444444"};
        SvgSeries predicted{
            "predicted",
            std::vector<double>(rep.predictions.end() - tail, rep.predictions.end()),
            "#d62728"};
        const SvgSeries chart[] = {actual, predicted};
        write_line_chart(pred_plot, chart, "one-step predictions");
      }
      return 0;
    }
    if (sweep->parsed()) {
      const TimeSeries series = read_series(sweep_in);
      std::vector<ReportRow> rows;
      for (const auto& scheme : parse_string_list(sweep_schemes))
        for (const auto& wtext : parse_string_list(sweep_windows))
          for (const auto& kernel : parse_string_list(sweep_kernels))
            for (const auto& ktext : parse_string_list(sweep_Ks))
              for (const auto& weighting : parse_string_list(sweep_weightings))
                for (const auto& estimator : parse_string_list(sweep_estimators)) {
                  FitOptions fo = sweep_fo;
                  fo.kernel = kernel;
                  fo.K = std::stoul(ktext);
                  fo.weighting = weighting;
                  const auto [setup, rep] = run_predict(
                      sweep_in, fo, scheme, sweep_p, std::stoul(wtext), sweep_fit_window,
                      sweep_stride, sweep_ls_weighting, true, estimator,
                      sweep_drift_estimator, sweep_bin_mode, sweep_J, false, sweep_seed,
                      series);
                  rows.push_back(make_report_row(setup, rep, fo, sweep_ls_weighting));
                }
      save_report_csv(sweep_out, rows);
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::runtime_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
