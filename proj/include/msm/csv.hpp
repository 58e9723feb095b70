#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "msm/features.hpp"
#include "msm/forecasting.hpp"
#include "msm/reconstruction.hpp"
#include "msm/separation.hpp"
#include "msm/series.hpp"

namespace msm {

namespace detail {

/// Splits one line. A space delimiter means "any run of blanks", which is
/// what the OMNI fixed-width listings need.
inline std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  if (delim == ' ') {
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
  }
  std::string cur;
  for (char ch : line) {
    if (ch == delim) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

inline bool parse_index(const std::string& s, std::size_t& out) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  out = std::stoul(s);
  return true;
}

}  // namespace detail

/// Writes through a `.partial` file and renames on commit, so an aborted run
/// never leaves a well-named but truncated report behind.
class AtomicWriter {
 public:
  explicit AtomicWriter(const std::string& path)
      : path_(path), tmp_(path + ".partial"), out_(tmp_, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open output file: " + tmp_);
  }

  std::ofstream& stream() { return out_; }

  void commit() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed: " + tmp_);
    out_.close();
    std::filesystem::rename(tmp_, path_);
    committed_ = true;
  }

  ~AtomicWriter() {
    if (!committed_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

 private:
  std::string path_, tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

struct CsvOptions {
  char delimiter = ',';
};

/// Loads one numeric column. Cells equal to the sentinel (exact match),
/// empty cells and non-finite values are treated as missing: interior runs
/// are linearly interpolated between the nearest valid neighbours,
/// leading/trailing runs are dropped. The header row is optional; `column`
/// is a 0-based index or a header name.
inline TimeSeries load_csv(const std::string& path, const std::string& column = "0",
                           std::optional<double> sentinel = {},
                           const CsvOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read input file: " + path);

  std::string line;
  std::vector<double> raw;
  std::vector<char> missing;
  std::size_t col = 0;
  bool col_resolved = detail::parse_index(column, col);
  bool first_row = true;

  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = detail::split_fields(line, opts.delimiter);
    if (first_row) {
      first_row = false;
      if (!col_resolved) {
        const auto it = std::find(fields.begin(), fields.end(), column);
        if (it == fields.end())
          throw std::invalid_argument("column not found: " + column);
        col = static_cast<std::size_t>(it - fields.begin());
        col_resolved = true;
        continue;  // header consumed
      }
      // numeric column index: skip the row if it does not parse (header)
      double probe;
      if (col < fields.size() && !detail::parse_double(fields[col], probe)) continue;
    }
    if (col >= fields.size())
      throw std::invalid_argument("row with too few columns in " + path);
    double v;
    const bool ok = detail::parse_double(fields[col], v);
    const bool miss = !ok || !std::isfinite(v) || (sentinel && v == *sentinel);
    raw.push_back(miss ? 0.0 : v);
    missing.push_back(miss ? 1 : 0);
  }
  if (raw.empty()) throw std::invalid_argument("no data rows in " + path);

  // trim leading/trailing missing, interpolate interior gaps
  std::size_t lo = 0, hi = raw.size();
  while (lo < hi && missing[lo]) ++lo;
  while (hi > lo && missing[hi - 1]) --hi;
  if (lo == hi) throw std::invalid_argument("all values missing in " + path);
  TimeSeries out;
  out.name = column;
  out.values.assign(raw.begin() + lo, raw.begin() + hi);
  std::vector<char> miss(missing.begin() + lo, missing.begin() + hi);
  std::size_t i = 0;
  while (i < out.values.size()) {
    if (!miss[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < out.values.size() && miss[j]) ++j;
    const double left = out.values[i - 1];
    const double right = out.values[j];
    const double run = static_cast<double>(j - i + 1);
    for (std::size_t k = i; k < j; ++k)
      out.values[k] = left + (right - left) * static_cast<double>(k - i + 1) / run;
    i = j;
  }
  return out;
}

inline void save_series_csv(const std::string& path, const TimeSeries& series,
                            const CsvOptions& opts = {}) {
  AtomicWriter out(path);
  out.stream() << (series.name.empty() ? "value" : series.name) << "\n";
  (void)opts;
  for (double v : series.values) out.stream() << detail::fmt_double(v) << "\n";
  out.commit();
}

/// Per-window estimates: `i,family,K,loglik,l2,converged,p_1,a_1,b_1[,r_1],...`
inline void save_estimates_csv(const std::string& path,
                               std::span<const WindowEstimate> estimates) {
  if (estimates.empty()) throw std::invalid_argument("no estimates to write");
  const KernelFamily family = estimates.front().model.family;
  const std::size_t K = estimates.front().model.order();
  AtomicWriter out(path);
  out.stream() << "i,family,K,loglik,l2,converged";
  for (std::size_t k = 1; k <= K; ++k) {
    out.stream() << ",p_" << k << ",a_" << k << ",b_" << k;
    if (family == KernelFamily::student) out.stream() << ",r_" << k;
  }
  out.stream() << "\n";
  for (const auto& est : estimates) {
    out.stream() << est.index << "," << to_string(est.model.family) << ","
                 << est.model.order() << "," << detail::fmt_double(est.loglik) << ","
                 << detail::fmt_double(est.l2) << "," << (est.converged ? 1 : 0);
    for (const auto& c : est.model.components) {
      out.stream() << "," << detail::fmt_double(c.weight) << ","
                   << detail::fmt_double(c.location) << "," << detail::fmt_double(c.scale);
      if (family == KernelFamily::student)
        out.stream() << "," << detail::fmt_double(c.shape.value_or(0.0));
    }
    out.stream() << "\n";
  }
  out.commit();
}

inline std::vector<WindowEstimate> load_estimates_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read estimates file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty estimates file: " + path);
  std::vector<WindowEstimate> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_fields(line, ',');
    if (f.size() < 9) throw std::invalid_argument("malformed estimates row: " + line);
    WindowEstimate est;
    est.index = std::stoul(f[0]);
    est.model.family = kernel_family_from_string(f[1]);
    const std::size_t K = std::stoul(f[2]);
    est.loglik = std::stod(f[3]);
    est.l2 = std::stod(f[4]);
    est.converged = f[5] == "1";
    const std::size_t per = est.model.family == KernelFamily::student ? 4 : 3;
    if (f.size() != 6 + per * K)
      throw std::invalid_argument("malformed estimates row: " + line);
    for (std::size_t k = 0; k < K; ++k) {
      MixtureComponent c;
      c.weight = std::stod(f[6 + per * k]);
      c.location = std::stod(f[7 + per * k]);
      c.scale = std::stod(f[8 + per * k]);
      if (per == 4) c.shape = std::stod(f[9 + per * k]);
      est.model.components.push_back(c);
    }
    out.push_back(std::move(est));
  }
  return out;
}

/// `i,a_bar,b_bar`
inline void save_coefficients_csv(const std::string& path, const CoefficientSeries& co) {
  AtomicWriter out(path);
  out.stream() << "i,a_bar,b_bar\n";
  for (std::size_t i = 0; i < co.indices.size(); ++i)
    out.stream() << co.indices[i] << "," << detail::fmt_double(co.a_bar[i]) << ","
                 << detail::fmt_double(co.b_bar[i]) << "\n";
  out.commit();
}

/// `i,selected_bin,alpha_selected,nu_min` (selected_bin is 1-based)
inline void save_nonuniform_csv(const std::string& path,
                                std::span<const NonUniformEstimate> estimates) {
  AtomicWriter out(path);
  out.stream() << "i,selected_bin,alpha_selected,nu_min\n";
  for (const auto& est : estimates)
    out.stream() << est.index << "," << est.selected_bin + 1 << ","
                 << detail::fmt_double(est.selected_drift) << "," << est.nu_min() << "\n";
  out.commit();
}

/// `i,f_1..f_M`
inline void save_features_csv(const std::string& path, const FeatureMatrix& fm) {
  AtomicWriter out(path);
  out.stream() << "i";
  for (std::size_t j = 1; j <= (fm.rows.empty() ? fm.grid.size() : fm.rows[0].size()); ++j)
    out.stream() << ",f_" << j;
  out.stream() << "\n";
  for (std::size_t i = 0; i < fm.rows.size(); ++i) {
    out.stream() << fm.indices[i];
    for (double v : fm.rows[i]) out.stream() << "," << detail::fmt_double(v);
    out.stream() << "\n";
  }
  out.commit();
}

/// One line of the prediction report table.
struct ReportRow {
  std::string scheme;      // e.g. ar(1)
  std::size_t window = 0;  // window width
  std::string kernel;      // normal | student | logistic | -
  std::string K;           // mixture order or -
  std::string weighting;   // uniform | exp:p | linear | calibrated:m
  std::string estimator;   // mean/median/mode, avg/med/mode, or -
  double mae = 0.0;
  double rmse = 0.0;
  double dir = 0.0;
  std::size_t n_predictions = 0;
};

inline constexpr const char* kReportHeader =
    "scheme,window,kernel,K,weighting,estimator,mae,rmse,dir,n_predictions";

inline void save_report_csv(const std::string& path, std::span<const ReportRow> rows) {
  AtomicWriter out(path);
  out.stream() << kReportHeader << "\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.7f,%.7f,%.7f", r.mae, r.rmse, r.dir);
    out.stream() << r.scheme << "," << r.window << "," << r.kernel << "," << r.K << ","
                 << r.weighting << "," << r.estimator << "," << buf << ","
                 << r.n_predictions << "\n";
  }
  out.commit();
}

/// `i,y_true,y_pred`
inline void save_predictions_csv(const std::string& path, const PredictionReport& rep) {
  AtomicWriter out(path);
  out.stream() << "i,y_true,y_pred\n";
  for (std::size_t i = 0; i < rep.predictions.size(); ++i)
    out.stream() << rep.target_indices[i] << "," << detail::fmt_double(rep.actuals[i]) << ","
                 << detail::fmt_double(rep.predictions[i]) << "\n";
  out.commit();
}

}  // namespace msm
