#include "igc/linear_granger.hpp"

#include "igc/dataset_io.hpp"
#include "igc/parallel.hpp"
#include "igc/prox.hpp"

#include <random>

namespace igc {

namespace {

// Sufficient statistics of one environment for the quadratic row losses.
struct EnvMoments {
  Matrix gram;     // Z^T Z / N
  Vector mean;     // column means of Z
  Matrix cross;    // Z^T Y / N, q x d
  Vector y_mean;   // d
  Vector y_sq;     // ||Y_i||^2 / N per target series
};

std::vector<EnvMoments> moments(const MultiEnvDataset& data, Index lag) {
  std::vector<EnvMoments> out;
  for (const auto& series : data.environments()) {
    const Matrix Z = lagged_design(series, lag);
    const Matrix Y = series.bottomRows(series.rows() - lag);
    const double n = static_cast<double>(Z.rows());
    EnvMoments m;
    m.gram = Z.transpose() * Z / n;
    m.mean = Z.colwise().mean().transpose();
    m.cross = Z.transpose() * Y / n;
    m.y_mean = Y.colwise().mean().transpose();
    m.y_sq = Y.colwise().squaredNorm().transpose() / n;
    out.push_back(std::move(m));
  }
  return out;
}

// Parameter vector of one effect row: [w0 | d_1 .. d_n (if any) | b_1 .. b_n].
struct RowLayout {
  Index q;
  Index n;
  bool deltas;
  Index size() const { return q * (deltas ? n + 1 : 1) + n; }
  Index delta(Index k) const { return q * (k + 1); }
  Index intercept(Index k) const { return q * (deltas ? n + 1 : 1) + k; }
};

struct RowProblem {
  const std::vector<EnvMoments>* env;
  RowLayout layout;
  Index row;

  // Mean-normalized half squared error summed over environments.
  double value(const Vector& x, Vector* grad) const {
    const Index q = layout.q;
    double total = 0.0;
    if (grad) grad->setZero(x.size());
    for (Index k = 0; k < layout.n; ++k) {
      const EnvMoments& m = (*env)[static_cast<size_t>(k)];
      Vector beta = x.head(q);
      if (layout.deltas) beta += x.segment(layout.delta(k), q);
      const double b = x(layout.intercept(k));
      const Vector g_beta = m.gram * beta;
      const double ybar = m.y_mean(row);
      total += 0.5 * (beta.dot(g_beta) + b * b + m.y_sq(row) + 2.0 * b * beta.dot(m.mean) -
                      2.0 * beta.dot(m.cross.col(row)) - 2.0 * b * ybar);
      if (grad) {
        const Vector gb = g_beta + b * m.mean - m.cross.col(row);
        grad->head(q) += gb;
        if (layout.deltas) grad->segment(layout.delta(k), q) += gb;
        (*grad)(layout.intercept(k)) += b + beta.dot(m.mean) - ybar;
      }
    }
    return total;
  }
};

template <typename Fn>
void for_each_family(Vector& x, const RowLayout& layout, Index dim, Index lag, Fn&& fn) {
  for (Index j = 0; j < dim; ++j) {
    std::vector<Eigen::Ref<Vector>> groups;
    groups.emplace_back(x.segment(j * lag, lag));
    if (layout.deltas)
      for (Index k = 0; k < layout.n; ++k)
        groups.emplace_back(x.segment(layout.delta(k) + j * lag, lag));
    fn(groups);
  }
}

double row_penalty(const Vector& x, const RowLayout& layout, Index dim, Index lag,
                   const FitConfig& cfg) {
  double pen = 0.0;
  for (Index j = 0; j < dim; ++j) {
    double sq = x.segment(j * lag, lag).squaredNorm();
    if (layout.deltas) {
      for (Index k = 0; k < layout.n; ++k) {
        const auto seg = x.segment(layout.delta(k) + j * lag, lag);
        sq += seg.squaredNorm();
        pen += cfg.alpha * cfg.lambda * seg.norm();
      }
    }
    pen += (1.0 - cfg.alpha) * cfg.lambda * std::sqrt(sq);
  }
  return pen;
}

// Largest eigenvalue of the (row-independent) Hessian by power iteration.
double lipschitz_constant(const RowProblem& p) {
  const Index size = p.layout.size();
  Vector v = Vector::Ones(size).normalized();
  Vector g(size), g0(size);
  const Vector zero = Vector::Zero(size);
  p.value(zero, &g0);
  double est = 1.0;
  for (int it = 0; it < 200; ++it) {
    p.value(v, &g);
    const Vector hv = g - g0;
    const double n = hv.norm();
    if (n == 0.0) break;
    est = n;
    v = hv / n;
  }
  return est;
}

Vector pack_row(const LinearParams& params, const RowLayout& layout, Index i) {
  Vector x(layout.size());
  x.head(layout.q) = params.W0.row(i).transpose();
  if (layout.deltas)
    for (Index k = 0; k < layout.n; ++k)
      x.segment(layout.delta(k), layout.q) = params.deltas[static_cast<size_t>(k)].row(i).transpose();
  for (Index k = 0; k < layout.n; ++k) x(layout.intercept(k)) = params.intercepts(i, k);
  return x;
}

void unpack_row(const Vector& x, const RowLayout& layout, Index i, LinearParams& params) {
  params.W0.row(i) = x.head(layout.q).transpose();
  for (Index k = 0; k < layout.n; ++k) {
    if (layout.deltas)
      params.deltas[static_cast<size_t>(k)].row(i) = x.segment(layout.delta(k), layout.q).transpose();
    params.intercepts(i, k) = x(layout.intercept(k));
  }
}

}  // namespace

Matrix lagged_design(const Matrix& series, Index lag) {
  const Index rows = series.rows() - lag;
  const Index d = series.cols();
  Matrix Z(rows, d * lag);
  for (Index t = 0; t < rows; ++t)
    for (Index j = 0; j < d; ++j)
      for (Index p = 0; p < lag; ++p) Z(t, j * lag + p) = series(t + lag - 1 - p, j);
  return Z;
}

LinearParams fit_linear(const MultiEnvDataset& raw, const FitConfig& cfg) {
  cfg.validate();
  raw.require_length(cfg.lag);
  const MultiEnvDataset data = cfg.standardize ? standardize(raw) : raw;
  const Index d = data.dim();
  const Index n = data.num_envs();
  const Index lag = cfg.lag;
  const auto env = moments(data, lag);

  LinearParams params;
  params.lag = lag;
  params.has_deltas = n > 1;
  params.W0 = Matrix::Zero(d, d * lag);
  params.deltas.assign(static_cast<size_t>(n), Matrix::Zero(d, d * lag));
  params.intercepts = Matrix::Zero(d, n);
  if (cfg.seed != 0) {
    // Non-zero seeds start from a random point; the problem is convex, so
    // this only changes the path.
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(-cfg.init_scale, cfg.init_scale);
    for (Index i = 0; i < d; ++i)
      for (Index c = 0; c < d * lag; ++c) params.W0(i, c) = u(rng);
    if (params.has_deltas)
      for (auto& D : params.deltas)
        for (Index i = 0; i < d; ++i)
          for (Index c = 0; c < d * lag; ++c) D(i, c) = u(rng);
  }

  const RowLayout layout{d * lag, n, params.has_deltas};
  const double L = lipschitz_constant(RowProblem{&env, layout, 0});
  ProxGradientOptions opt;
  opt.step_size = std::min(cfg.step_size, 1.0 / L);
  opt.step_growth = cfg.step_growth;
  opt.tol = cfg.tol;
  opt.max_iters = cfg.max_iters;

  std::vector<ProxGradientResult> results(static_cast<size_t>(d));
  parallel_for(d, cfg.threads, [&](long li) {
    const Index i = li;
    const RowProblem problem{&env, layout, i};
    auto smooth = [&](const Vector& x, Vector* g) { return problem.value(x, g); };
    auto prox = [&](Vector& x, double step) {
      for_each_family(x, layout, d, lag, [&](auto& groups) {
        hierarchical_prox_inplace(groups, cfg.alpha, cfg.lambda * step);
      });
    };
    auto penalty = [&](const Vector& x) { return row_penalty(x, layout, d, lag, cfg); };
    results[static_cast<size_t>(i)] =
        prox_gradient_loop(smooth, prox, penalty, pack_row(params, layout, i), opt);
  });

  params.converged = true;
  size_t longest = 0;
  for (Index i = 0; i < d; ++i) {
    const auto& r = results[static_cast<size_t>(i)];
    unpack_row(r.x, layout, i, params);
    params.converged = params.converged && r.converged;
    params.iterations = std::max(params.iterations, r.iterations);
    longest = std::max(longest, r.trace.size());
  }
  params.trace.assign(longest, 0.0);
  for (const auto& r : results)
    for (size_t t = 0; t < longest; ++t) params.trace[t] += r.trace[std::min(t, r.trace.size() - 1)];
  return params;
}

double linear_objective(const LinearParams& params, const MultiEnvDataset& data,
                        const FitConfig& cfg) {
  const Index d = data.dim();
  const auto env = moments(data, params.lag);
  const RowLayout layout{d * params.lag, data.num_envs(), params.has_deltas};
  double total = 0.0;
  for (Index i = 0; i < d; ++i) {
    const Vector x = pack_row(params, layout, i);
    total += RowProblem{&env, layout, i}.value(x, nullptr) +
             row_penalty(x, layout, d, params.lag, cfg);
  }
  return total;
}

std::pair<GrangerGraph, InterventionalFamily> extract_linear_graph(const LinearParams& params,
                                                                   const FitConfig& cfg) {
  const Index d = params.dim();
  Matrix scores(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) scores(i, j) = params.group_norm(params.W0, i, j);
  std::vector<Matrix> target_scores;
  for (const auto& D : params.deltas) {
    Matrix s(d, d);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) s(i, j) = params.group_norm(D, i, j);
    target_scores.push_back(std::move(s));
  }
  return {GrangerGraph::from_scores(scores, cfg.edge_threshold),
          InterventionalFamily::from_scores(target_scores, cfg.target_threshold)};
}

}  // namespace igc
