#include "igc/types.hpp"

#include <cmath>
#include <sstream>

namespace igc {

MultiEnvDataset::MultiEnvDataset(std::vector<Matrix> environments,
                                 std::vector<std::string> names)
    : envs_(std::move(environments)), names_(std::move(names)) {
  if (envs_.empty()) throw DataError("dataset has no environments");
  dim_ = envs_.front().cols();
  if (dim_ < 1) throw DataError("dataset has zero series");
  for (size_t k = 0; k < envs_.size(); ++k) {
    const Matrix& m = envs_[k];
    if (m.cols() != dim_) {
      std::ostringstream os;
      os << "environment " << k << " has " << m.cols() << " series, expected " << dim_;
      throw DataError(os.str());
    }
    if (m.rows() < 3) {
      std::ostringstream os;
      os << "environment " << k << " has only " << m.rows() << " time steps";
      throw DataError(os.str());
    }
    if (!m.allFinite()) {
      std::ostringstream os;
      os << "environment " << k << " contains non-finite values";
      throw DataError(os.str());
    }
  }
  if (!names_.empty() && static_cast<Index>(names_.size()) != dim_)
    throw DataError("number of series names does not match d");
}

Index MultiEnvDataset::min_length() const {
  Index t = envs_.empty() ? 0 : envs_.front().rows();
  for (const auto& m : envs_) t = std::min(t, m.rows());
  return t;
}

void MultiEnvDataset::require_length(Index lag) const {
  for (size_t k = 0; k < envs_.size(); ++k) {
    if (envs_[k].rows() < lag + 2) {
      std::ostringstream os;
      os << "environment " << k << " has " << envs_[k].rows()
         << " time steps; lag " << lag << " needs at least " << lag + 2;
      throw DataError(os.str());
    }
  }
}

GrangerGraph GrangerGraph::from_scores(const Matrix& scores, double threshold) {
  if (scores.rows() != scores.cols()) throw DataError("score matrix must be square");
  if ((scores.array() < 0.0).any()) throw DataError("scores must be non-negative");
  GrangerGraph g;
  g.adjacency = (scores.array() > threshold).cast<int>();
  g.scores = scores;
  g.threshold = threshold;
  return g;
}

void GrangerGraph::validate() const {
  if (adjacency.rows() != adjacency.cols()) throw DataError("adjacency must be square");
  if (((adjacency.array() != 0) && (adjacency.array() != 1)).any())
    throw DataError("adjacency entries must be 0 or 1");
  if (scores) {
    if (scores->rows() != adjacency.rows() || scores->cols() != adjacency.cols())
      throw DataError("scores shape does not match adjacency");
    if ((scores->array() < 0.0).any()) throw DataError("scores must be non-negative");
    for (Index i = 0; i < adjacency.rows(); ++i)
      for (Index j = 0; j < adjacency.cols(); ++j)
        if (adjacency(i, j) == 1 && !((*scores)(i, j) > threshold))
          throw DataError("edge present with score at or below threshold");
  }
}

InterventionalFamily InterventionalFamily::zeros(Index envs, Index dim) {
  InterventionalFamily f;
  f.targets.assign(static_cast<size_t>(envs), BinaryMatrix::Zero(dim, dim));
  return f;
}

InterventionalFamily InterventionalFamily::from_scores(const std::vector<Matrix>& scores,
                                                       double threshold) {
  InterventionalFamily f;
  for (const auto& s : scores) f.targets.push_back((s.array() > threshold).cast<int>());
  f.scores = scores;
  return f;
}

void InterventionalFamily::validate() const {
  if (targets.empty()) return;
  const Index d = targets.front().rows();
  for (const auto& t : targets) {
    if (t.rows() != d || t.cols() != d) throw DataError("target matrices must all be d x d");
    if (((t.array() != 0) && (t.array() != 1)).any())
      throw DataError("target entries must be 0 or 1");
  }
  if (!scores.empty() && scores.size() != targets.size())
    throw DataError("target scores do not match environment count");
}

void FitConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie strictly inside (0, 1)");
  if (lag < 1) throw ConfigError("lag must be >= 1");
  if (hidden < 1) throw ConfigError("hidden width must be >= 1");
  if (!(step_size > 0.0)) throw ConfigError("step_size must be > 0");
  if (!(step_growth >= 1.0)) throw ConfigError("step_growth must be >= 1");
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (warmup_iters < 0) throw ConfigError("warmup_iters must be >= 0");
  if (!(tol >= 0.0)) throw ConfigError("tol must be >= 0");
  if (!(edge_threshold >= 0.0) || !(target_threshold >= 0.0))
    throw ConfigError("thresholds must be >= 0");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0))
    throw ConfigError("leaky_slope must lie in [0, 1)");
  if (!(init_scale > 0.0)) throw ConfigError("init_scale must be > 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

}  // namespace igc
