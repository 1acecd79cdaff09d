#include "igc/neural_igc.hpp"

#include "igc/dataset_io.hpp"
#include "igc/linear_granger.hpp"
#include "igc/parallel.hpp"
#include "igc/prox.hpp"

namespace igc {

namespace {

struct NodeProblem {
  const NetLayout* layout;
  double slope;
  const std::vector<Matrix>* inputs;   // per environment, d*lag x N_k
  const std::vector<Matrix>* targets;  // per environment, N_k x d
  Index node;

  // sum_k mean_t 1/2 (prediction - target)^2
  double value(const Vector& x, Vector* grad, NodeActivations<double>& act) const {
    double total = 0.0;
    if (grad) grad->setZero(x.size());
    for (Index k = 0; k < layout->envs; ++k) {
      const Matrix& in = (*inputs)[static_cast<size_t>(k)];
      detail::node_forward(*layout, slope, x, in, k, act);
      const double w = 1.0 / static_cast<double>(in.cols());
      act.residual = act.prediction - (*targets)[static_cast<size_t>(k)].col(node);
      total += 0.5 * w * act.residual.squaredNorm();
      if (grad) {
        act.residual *= w;
        detail::node_backward(*layout, slope, x, in, k, act, act.residual, *grad);
      }
    }
    return total;
  }
};

template <typename Vec>
double node_penalty(const Vec& x, const NetLayout& l, const FitConfig& cfg) {
  double pen = 0.0;
  for (Index j = 0; j < l.dim; ++j) {
    double sq = x.segment(l.block_offset(0, j), l.block_size()).squaredNorm();
    for (Index c = 1; c < l.num_components(); ++c) {
      const auto seg = x.segment(l.block_offset(c, j), l.block_size());
      sq += seg.squaredNorm();
      pen += cfg.alpha * cfg.lambda * seg.norm();
    }
    pen += (1.0 - cfg.alpha) * cfg.lambda * std::sqrt(sq);
  }
  return pen;
}

void node_prox(Vector& x, const NetLayout& l, double alpha, double threshold) {
  std::vector<Eigen::Ref<Vector>> groups;
  groups.reserve(static_cast<size_t>(l.num_components()));
  for (Index j = 0; j < l.dim; ++j) {
    groups.clear();
    for (Index c = 0; c < l.num_components(); ++c)
      groups.emplace_back(x.segment(l.block_offset(c, j), l.block_size()));
    hierarchical_prox_inplace(groups, alpha, threshold);
  }
}

struct Prepared {
  std::vector<Matrix> inputs;
  std::vector<Matrix> targets;
};

Prepared prepare(const MultiEnvDataset& data, Index lag) {
  Prepared p;
  for (const auto& series : data.environments()) {
    p.inputs.push_back(window_inputs(series, lag));
    p.targets.push_back(series.bottomRows(series.rows() - lag));
  }
  return p;
}

}  // namespace

Matrix window_inputs(const Matrix& series, Index lag) {
  return lagged_design(series, lag).transpose();
}

IgcModeld fit_igc(const MultiEnvDataset& raw, const FitConfig& cfg) {
  cfg.validate();
  raw.require_length(cfg.lag);
  const MultiEnvDataset data = cfg.standardize ? standardize(raw) : raw;
  const NetLayout layout{data.dim(), cfg.lag, cfg.hidden, data.num_envs()};
  IgcModeld model = IgcModeld::initialized(layout, cfg.leaky_slope, cfg.init_scale, cfg.seed);
  model.config = cfg;
  const Prepared prep = prepare(data, cfg.lag);

  ProxGradientOptions opt;
  opt.step_size = cfg.step_size;
  opt.step_growth = cfg.step_growth;
  opt.tol = cfg.tol;
  opt.max_iters = cfg.max_iters;

  std::vector<ProxGradientResult> results(static_cast<size_t>(layout.dim));
  parallel_for(layout.dim, cfg.threads, [&](long li) {
    const Index i = li;
    const NodeProblem problem{&layout, cfg.leaky_slope, &prep.inputs, &prep.targets, i};
    NodeActivations<double> act;
    auto smooth = [&](const Vector& x, Vector* g) { return problem.value(x, g, act); };
    auto prox = [&](Vector& x, double step) { node_prox(x, layout, cfg.alpha, cfg.lambda * step); };
    auto penalty = [&](const Vector& x) { return node_penalty(x, layout, cfg); };
    Vector x0 = model.node(i);
    if (cfg.warmup_iters > 0) {
      // Fit the pooled model first so weak parents are not pruned by the
      // penalty before the small initial network can express them.
      auto pooled = [&](Vector& x, double) {
        for (Index c = 1; c < layout.num_components(); ++c)
          x.segment(layout.component_offset(c), layout.first_layer_size() + layout.hidden).setZero();
      };
      ProxGradientOptions warm = opt;
      warm.max_iters = cfg.warmup_iters;
      x0 = prox_gradient_loop(smooth, pooled, [](const Vector&) { return 0.0; }, std::move(x0), warm).x;
    }
    results[static_cast<size_t>(i)] = prox_gradient_loop(smooth, prox, penalty, std::move(x0), opt);
  });

  FitDiagnostics diag;
  diag.converged = true;
  size_t longest = 0;
  for (Index i = 0; i < layout.dim; ++i) {
    const auto& r = results[static_cast<size_t>(i)];
    model.mutable_node(i) = r.x;
    diag.converged = diag.converged && r.converged;
    diag.iterations = std::max(diag.iterations, r.iterations);
    longest = std::max(longest, r.trace.size());
  }
  diag.trace.assign(longest, 0.0);
  for (const auto& r : results)
    for (size_t t = 0; t < longest; ++t) diag.trace[t] += r.trace[std::min(t, r.trace.size() - 1)];
  model.diagnostics = std::move(diag);
  return model;
}

double igc_objective(const IgcModeld& model, const MultiEnvDataset& data, const FitConfig& cfg) {
  const NetLayout& l = model.layout();
  if (data.dim() != l.dim || data.num_envs() != l.envs)
    throw DataError("dataset shape does not match the model");
  const Prepared prep = prepare(data, l.lag);
  NodeActivations<double> act;
  double total = 0.0;
  for (Index i = 0; i < l.dim; ++i) {
    const NodeProblem problem{&l, model.leaky_slope(), &prep.inputs, &prep.targets, i};
    total += problem.value(model.node(i), nullptr, act) + node_penalty(model.node(i), l, cfg);
  }
  return total;
}

GrangerGraph extract_graph(const IgcModeld& model, const FitConfig& cfg) {
  const Index d = model.dim();
  Matrix scores(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) scores(i, j) = model.causal_block(i, j).norm();
  return GrangerGraph::from_scores(scores, cfg.edge_threshold);
}

InterventionalFamily recover_targets(const IgcModeld& model, const FitConfig& cfg) {
  const Index d = model.dim();
  std::vector<Matrix> scores;
  for (Index k = 0; k < model.num_envs(); ++k) {
    Matrix s(d, d);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) s(i, j) = model.intervention_block(k, i, j).norm();
    scores.push_back(std::move(s));
  }
  return InterventionalFamily::from_scores(scores, cfg.target_threshold);
}

Matrix lag_scores(const IgcModeld& model, Index p) {
  const NetLayout& l = model.layout();
  if (p < 1 || p > l.lag) throw DataError("lag index out of range");
  Matrix s(l.dim, l.dim);
  for (Index i = 0; i < l.dim; ++i) {
    const auto net = model.component(i, 0);
    for (Index j = 0; j < l.dim; ++j) s(i, j) = net.W1.col(j * l.lag + p - 1).norm();
  }
  return s;
}

}  // namespace igc
