#pragma once

#include "igc/types.hpp"

#include <utility>
#include <vector>

namespace igc {

/// Shared and per-environment coefficients of the interventional
/// Lasso-Granger model. Regressor column j * lag + p holds series j at lag
/// p + 1, so every (effect, cause, environment) group is a contiguous run of
/// `lag` entries in one row.
struct LinearParams {
  Index lag = 1;
  Matrix W0;                   // d x (d * lag)
  std::vector<Matrix> deltas;  // n matrices, d x (d * lag)
  Matrix intercepts;           // d x n, unpenalized
  // False for single-environment fits, where the deltas cannot be separated
  // from W0 and are held at zero.
  bool has_deltas = true;

  std::vector<double> trace;  // composite objective summed over rows
  bool converged = false;
  int iterations = 0;

  Index dim() const { return W0.rows(); }
  Index num_envs() const { return static_cast<Index>(deltas.size()); }
  double group_norm(const Matrix& coeffs, Index i, Index j) const {
    return coeffs.row(i).segment(j * lag, lag).norm();
  }
};

/// Fits min sum_k mean_t 1/2 ||x_t - (W0 + D_k) z_t - b_k||^2
///       + (1 - alpha) lambda sum_ij ||(W0_ij, D_1,ij, ..., D_n,ij)||
///       + alpha lambda sum_ijk ||D_k,ij||
/// by proximal gradient descent, one independent subproblem per effect row.
LinearParams fit_linear(const MultiEnvDataset& data, const FitConfig& cfg);

/// Smooth loss plus penalty of `params` on `data` (already preprocessed the
/// same way the fit saw it).
double linear_objective(const LinearParams& params, const MultiEnvDataset& data,
                        const FitConfig& cfg);

std::pair<GrangerGraph, InterventionalFamily> extract_linear_graph(const LinearParams& params,
                                                                   const FitConfig& cfg);

// Lag-stacked regressors of one environment: row t holds
// (x_{t+lag-1}, ..., x_t) per series in the column order described above,
// aligned with targets x_{t+lag}.
Matrix lagged_design(const Matrix& series, Index lag);

}  // namespace igc
