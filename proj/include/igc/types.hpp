#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace igc {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BinaryMatrix = Eigen::MatrixXi;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Error taxonomy. The CLI maps each class onto a distinct exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct NumericalError : Error {
  using Error::Error;
};

/// Heterogeneous time series from n environments. Each environment is a
/// T_k x d matrix (rows are time steps, columns are series). Immutable once
/// constructed; the constructor enforces the shared dimension and finiteness.
class MultiEnvDataset {
 public:
  MultiEnvDataset() = default;
  explicit MultiEnvDataset(std::vector<Matrix> environments,
                           std::vector<std::string> names = {});

  Index num_envs() const { return static_cast<Index>(envs_.size()); }
  Index dim() const { return dim_; }
  const Matrix& env(Index k) const { return envs_.at(static_cast<size_t>(k)); }
  const std::vector<Matrix>& environments() const { return envs_; }
  const std::vector<std::string>& names() const { return names_; }
  Index min_length() const;

  // Throws DataError unless every environment yields at least one supervised
  // pair for the given lag (T_k >= lag + 2).
  void require_length(Index lag) const;

 private:
  std::vector<Matrix> envs_;
  std::vector<std::string> names_;
  Index dim_ = 0;
};

/// d x d Granger graph. adjacency(i, j) == 1 iff series j Granger-causes
/// series i (row = effect, column = cause). Self-loops are allowed.
struct GrangerGraph {
  BinaryMatrix adjacency;
  std::optional<Matrix> scores;
  double threshold = 0.0;

  Index dim() const { return adjacency.rows(); }
  Index num_edges() const { return adjacency.sum(); }

  // Binarizes non-negative scores: edge iff score > threshold.
  static GrangerGraph from_scores(const Matrix& scores, double threshold);
  void validate() const;
};

/// Edge-level interventional targets, one d x d binary matrix per
/// environment using the same orientation as GrangerGraph. An all-zero matrix
/// marks a non-intervened environment.
struct InterventionalFamily {
  std::vector<BinaryMatrix> targets;
  std::vector<Matrix> scores;  // optional; empty or one per environment

  Index num_envs() const { return static_cast<Index>(targets.size()); }
  bool intervened(Index k) const { return targets.at(static_cast<size_t>(k)).any(); }

  static InterventionalFamily zeros(Index envs, Index dim);
  static InterventionalFamily from_scores(const std::vector<Matrix>& scores,
                                          double threshold);
  void validate() const;
};

struct FitConfig {
  double lambda = 0.1;
  double alpha = 0.5;
  Index lag = 1;
  Index hidden = 16;
  double step_size = 1e-2;
  // Accepted steps are multiplied by this before the next backtracking
  // search; 1 keeps the classic non-increasing step sequence.
  double step_growth = 1.0;
  int max_iters = 2000;
  // Neural fits only: unpenalized iterations of the causal networks and heads
  // (intervention first layers held at zero) before the penalized phase.
  int warmup_iters = 0;
  double tol = 1e-6;
  double edge_threshold = 1e-3;
  double target_threshold = 1e-3;
  double leaky_slope = 0.1;
  double init_scale = 0.1;
  bool standardize = true;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

}  // namespace igc
