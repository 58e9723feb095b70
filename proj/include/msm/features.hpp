#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "msm/separation.hpp"
#include "msm/series.hpp"

namespace msm {

enum class FeatureKind { cdf_grid, quantile, order_stat };

inline std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::cdf_grid: return "cdf_grid";
    case FeatureKind::quantile: return "quantile";
    case FeatureKind::order_stat: return "order_stat";
  }
  return "cdf_grid";
}

inline FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "cdf_grid") return FeatureKind::cdf_grid;
  if (s == "quantile") return FeatureKind::quantile;
  if (s == "order_stat") return FeatureKind::order_stat;
  throw std::invalid_argument("unknown feature kind: " + s);
}

/// Per-window M-variate feature rows. `grid` holds the fixed grid points,
/// probability levels, or ranks depending on the kind.
struct FeatureMatrix {
  FeatureKind kind = FeatureKind::cdf_grid;
  std::vector<std::size_t> indices;
  std::vector<std::vector<double>> rows;
  std::vector<double> grid;
};

/// Mixture CDF values on a fixed grid; component identification across
/// windows is never needed.
inline FeatureMatrix cdf_grid_features(std::span<const WindowEstimate> estimates,
                                       const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("feature grid is empty");
  for (std::size_t j = 1; j < grid.size(); ++j)
    if (!(grid[j - 1] < grid[j]))
      throw std::invalid_argument("feature grid must be strictly increasing");
  FeatureMatrix out;
  out.kind = FeatureKind::cdf_grid;
  out.grid = grid;
  for (const auto& est : estimates) {
    std::vector<double> row(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) row[j] = mixture_cdf(est.model, grid[j]);
    out.indices.push_back(est.index);
    out.rows.push_back(std::move(row));
  }
  return out;
}

/// Mixture quantiles at fixed probability levels.
inline FeatureMatrix quantile_features(std::span<const WindowEstimate> estimates,
                                       const std::vector<double>& levels) {
  if (levels.empty()) throw std::invalid_argument("quantile levels are empty");
  for (std::size_t j = 0; j < levels.size(); ++j) {
    if (!(levels[j] > 0.0 && levels[j] < 1.0))
      throw std::invalid_argument("quantile level outside (0,1)");
    if (j > 0 && !(levels[j - 1] < levels[j]))
      throw std::invalid_argument("quantile levels must be strictly increasing");
  }
  FeatureMatrix out;
  out.kind = FeatureKind::quantile;
  out.grid = levels;
  for (const auto& est : estimates) {
    std::vector<double> row(levels.size());
    for (std::size_t j = 0; j < levels.size(); ++j)
      row[j] = mixture_quantile(est.model, levels[j]);
    out.indices.push_back(est.index);
    out.rows.push_back(std::move(row));
  }
  return out;
}

/// Nonparametric rows: the window order statistics at fixed ranks. The ranks
/// must form an arithmetic sequence inside [1, n].
inline FeatureMatrix order_stat_features(const TimeSeries& series, std::size_t n,
                                         const std::vector<std::size_t>& ranks,
                                         std::size_t stride = 1) {
  if (ranks.empty()) throw std::invalid_argument("rank list is empty");
  for (std::size_t r : ranks)
    if (r < 1 || r > n) throw std::invalid_argument("rank out of bounds");
  if (ranks.size() >= 2) {
    const std::ptrdiff_t step =
        static_cast<std::ptrdiff_t>(ranks[1]) - static_cast<std::ptrdiff_t>(ranks[0]);
    if (step <= 0) throw std::invalid_argument("ranks must be strictly increasing");
    for (std::size_t j = 2; j < ranks.size(); ++j)
      if (static_cast<std::ptrdiff_t>(ranks[j]) - static_cast<std::ptrdiff_t>(ranks[j - 1]) !=
          step)
        throw std::invalid_argument("ranks must form an arithmetic sequence");
  }
  FeatureMatrix out;
  out.kind = FeatureKind::order_stat;
  out.grid.assign(ranks.begin(), ranks.end());
  std::vector<double> sorted(n);
  for (const WindowView w : windows(series, n, stride)) {
    sorted.assign(w.values.begin(), w.values.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> row(ranks.size());
    for (std::size_t j = 0; j < ranks.size(); ++j) row[j] = sorted[ranks[j] - 1];
    out.indices.push_back(w.last_index);
    out.rows.push_back(std::move(row));
  }
  return out;
}

/// Equidistant ranks 1, 1+step, ... fitting inside [1, n].
inline std::vector<std::size_t> arithmetic_ranks(std::size_t n, std::size_t count) {
  if (count < 1 || count > n) throw std::invalid_argument("invalid rank count");
  const std::size_t step = count > 1 ? std::max<std::size_t>(1, (n - 1) / (count - 1)) : 1;
  std::vector<std::size_t> ranks(count);
  for (std::size_t j = 0; j < count; ++j) ranks[j] = 1 + j * step;
  return ranks;
}

/// Default fixed grid for cdf_grid_features: global min/max of the series
/// with the interior points at order statistics of equidistant ranks.
inline std::vector<double> default_cdf_grid(const TimeSeries& series, std::size_t M = 10) {
  if (M < 2) throw std::invalid_argument("grid needs at least two points");
  std::vector<double> sorted = series.values;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  const std::size_t n = sorted.size();
  if (n < M) throw std::invalid_argument("series has fewer distinct values than grid points");
  std::vector<double> grid(M);
  const double h = static_cast<double>(n - 1) / static_cast<double>(M - 1);
  for (std::size_t j = 0; j < M; ++j) {
    auto pos = static_cast<std::size_t>(std::llround(static_cast<double>(j) * h));
    grid[j] = sorted[std::min(pos, n - 1)];
  }
  return grid;
}

/// The nine deciles 0.1 .. 0.9.
inline std::vector<double> decile_levels() {
  std::vector<double> q(9);
  for (int i = 1; i <= 9; ++i) q[i - 1] = 0.1 * i;
  return q;
}

}  // namespace msm
