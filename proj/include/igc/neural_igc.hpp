#pragma once

#include "igc/types.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace igc {

/// Parameter layout of one node's networks. Every node owns a flat parameter
/// vector made of n + 1 component networks (component 0 is the causal network
/// C_i, component k + 1 the intervention network of environment k) followed
/// by the prediction head.
///
/// Component layout: W1 (hidden x d*lag, column-major), b1, W2 (hidden x
/// hidden), b2. Input row j * lag + p carries series j at lag p + 1, so the
/// first-layer block of source j is the contiguous run of lag * hidden
/// entries starting at block_offset(c, j). Those blocks are the penalty
/// groups; everything else is unpenalized.
struct NetLayout {
  Index dim = 0;
  Index lag = 1;
  Index hidden = 1;
  Index envs = 1;

  Index input_size() const { return dim * lag; }
  Index block_size() const { return lag * hidden; }
  Index first_layer_size() const { return hidden * input_size(); }
  Index component_size() const { return first_layer_size() + 2 * hidden + hidden * hidden; }
  Index num_components() const { return envs + 1; }
  Index component_offset(Index c) const { return c * component_size(); }
  Index block_offset(Index c, Index j) const { return component_offset(c) + j * block_size(); }
  Index predictor_offset() const { return num_components() * component_size(); }
  Index node_size() const { return predictor_offset() + hidden + 1; }

  bool operator==(const NetLayout&) const = default;
};

template <typename Scalar>
Scalar leaky(Scalar a, Scalar slope) {
  return a > Scalar(0) ? a : slope * a;
}
template <typename Scalar>
Scalar leaky_grad(Scalar a, Scalar slope) {
  return a > Scalar(0) ? Scalar(1) : slope;
}

template <typename Scalar>
struct ComponentView {
  Eigen::Map<const MatrixX<Scalar>> W1;
  Eigen::Map<const VectorX<Scalar>> b1;
  Eigen::Map<const MatrixX<Scalar>> W2;
  Eigen::Map<const VectorX<Scalar>> b2;

  ComponentView(const Scalar* base, const NetLayout& l)
      : W1(base, l.hidden, l.input_size()),
        b1(base + l.first_layer_size(), l.hidden),
        W2(base + l.first_layer_size() + l.hidden, l.hidden, l.hidden),
        b2(base + l.first_layer_size() + l.hidden + l.hidden * l.hidden, l.hidden) {}
};

template <typename Scalar>
struct ComponentGradView {
  Eigen::Map<MatrixX<Scalar>> W1;
  Eigen::Map<VectorX<Scalar>> b1;
  Eigen::Map<MatrixX<Scalar>> W2;
  Eigen::Map<VectorX<Scalar>> b2;

  ComponentGradView(Scalar* base, const NetLayout& l)
      : W1(base, l.hidden, l.input_size()),
        b1(base + l.first_layer_size(), l.hidden),
        W2(base + l.first_layer_size() + l.hidden, l.hidden, l.hidden),
        b2(base + l.first_layer_size() + l.hidden + l.hidden * l.hidden, l.hidden) {}
};

struct FitDiagnostics {
  std::vector<double> trace;  // composite objective summed over nodes
  bool converged = false;
  int iterations = 0;
};

/// The IGC network collection for all d nodes: shared causal networks,
/// per-environment intervention networks, summation aggregator and a linear
/// prediction head per node. Parameters are mutated only through
/// mutable_node(), which invalidates outstanding forward tapes.
template <typename Scalar>
class IgcModel {
 public:
  IgcModel() = default;
  IgcModel(NetLayout layout, Scalar leaky_slope)
      : layout_(layout),
        slope_(leaky_slope),
        params_(static_cast<size_t>(layout.dim), VectorX<Scalar>::Zero(layout.node_size())) {}

  /// Causal and prediction weights uniform in [-scale, scale]; intervention
  /// first layers (weights and biases) exactly zero, their deeper layers
  /// initialized like the causal network.
  static IgcModel initialized(NetLayout layout, Scalar leaky_slope, double scale,
                              std::uint64_t seed) {
    IgcModel m(layout, leaky_slope);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    const Index first = layout.first_layer_size() + layout.hidden;
    for (auto& p : m.params_) {
      for (Index c = 0; c < layout.num_components(); ++c) {
        const Index off = layout.component_offset(c);
        for (Index e = 0; e < layout.component_size(); ++e) {
          const double v = u(rng);
          p(off + e) = (c > 0 && e < first) ? Scalar(0) : Scalar(v);
        }
      }
      for (Index e = layout.predictor_offset(); e < layout.node_size(); ++e) p(e) = Scalar(u(rng));
    }
    return m;
  }

  const NetLayout& layout() const { return layout_; }
  Scalar leaky_slope() const { return slope_; }
  Index dim() const { return layout_.dim; }
  Index num_envs() const { return layout_.envs; }
  std::uint64_t version() const { return version_; }

  const VectorX<Scalar>& node(Index i) const { return params_.at(static_cast<size_t>(i)); }
  VectorX<Scalar>& mutable_node(Index i) {
    ++version_;
    return params_.at(static_cast<size_t>(i));
  }

  ComponentView<Scalar> component(Index i, Index c) const {
    return ComponentView<Scalar>(node(i).data() + layout_.component_offset(c), layout_);
  }
  auto predictor_weights(Index i) const { return node(i).segment(layout_.predictor_offset(), layout_.hidden); }
  Scalar predictor_bias(Index i) const { return node(i)(layout_.node_size() - 1); }

  // First-layer block of source j in component c of node i.
  auto block(Index i, Index c, Index j) const {
    return node(i).segment(layout_.block_offset(c, j), layout_.block_size());
  }
  auto causal_block(Index i, Index j) const { return block(i, 0, j); }
  auto intervention_block(Index k, Index i, Index j) const { return block(i, k + 1, j); }

  FitConfig config;
  FitDiagnostics diagnostics;

 private:
  NetLayout layout_;
  Scalar slope_ = Scalar(0.1);
  std::vector<VectorX<Scalar>> params_;
  std::uint64_t version_ = 0;
};

/// Activations of one batched node evaluation. Columns are samples; index
/// [0] is the causal network, [1] the environment's intervention network.
template <typename Scalar>
struct NodeActivations {
  MatrixX<Scalar> a1[2], h1[2], a2[2];
  MatrixX<Scalar> z;            // aggregated embedding, hidden x N
  VectorX<Scalar> prediction;   // N
  // Backward scratch, kept here so repeated passes do not reallocate.
  mutable MatrixX<Scalar> dz, da2, dh1, da1;
  VectorX<Scalar> residual;
};

/// Activations of a forward pass plus what backward needs to check that the
/// tape still matches the model.
template <typename Scalar>
struct ForwardTape : NodeActivations<Scalar> {
  Index node = 0;
  Index env = 0;
  std::uint64_t version = 0;
  MatrixX<Scalar> input;  // d*lag x N
};

namespace detail {

template <typename Scalar>
void component_forward(const ComponentView<Scalar>& net, const MatrixX<Scalar>& x, Scalar slope,
                       MatrixX<Scalar>& a1, MatrixX<Scalar>& h1, MatrixX<Scalar>& a2) {
  a1.noalias() = net.W1 * x;
  a1.colwise() += net.b1;
  h1 = a1.unaryExpr([slope](Scalar v) { return leaky(v, slope); });
  a2.noalias() = net.W2 * h1;
  a2.colwise() += net.b2;
}

template <typename Scalar>
void component_backward(const ComponentView<Scalar>& net, ComponentGradView<Scalar> grad,
                        const MatrixX<Scalar>& x, const MatrixX<Scalar>& a1,
                        const MatrixX<Scalar>& h1, const MatrixX<Scalar>& a2,
                        const MatrixX<Scalar>& dz, Scalar slope, MatrixX<Scalar>& da2,
                        MatrixX<Scalar>& dh1, MatrixX<Scalar>& da1) {
  da2 = dz.cwiseProduct(a2.unaryExpr([slope](Scalar v) { return leaky_grad(v, slope); }));
  grad.W2.noalias() += da2 * h1.transpose();
  grad.b2 += da2.rowwise().sum();
  dh1.noalias() = net.W2.transpose() * da2;
  da1 = dh1.cwiseProduct(a1.unaryExpr([slope](Scalar v) { return leaky_grad(v, slope); }));
  grad.W1.noalias() += da1 * x.transpose();
  grad.b1 += da1.rowwise().sum();
}

// Evaluates one node's networks, parameters given as a flat node vector.
template <typename Scalar>
void node_forward(const NetLayout& l, Scalar slope, const VectorX<Scalar>& params,
                  const MatrixX<Scalar>& input, Index env, NodeActivations<Scalar>& act) {
  act.z.setZero(l.hidden, input.cols());
  const Index comps[2] = {0, env + 1};
  for (int c = 0; c < 2; ++c) {
    const ComponentView<Scalar> net(params.data() + l.component_offset(comps[c]), l);
    component_forward(net, input, slope, act.a1[c], act.h1[c], act.a2[c]);
    act.z += act.a2[c].unaryExpr([slope](Scalar v) { return leaky(v, slope); });
  }
  const auto head = params.segment(l.predictor_offset(), l.hidden);
  act.prediction.noalias() = act.z.transpose() * head;
  act.prediction.array() += params(l.node_size() - 1);
}

// Accumulates d(sum_t 1/2 r_t^2)/d(params) into grad.
template <typename Scalar>
void node_backward(const NetLayout& l, Scalar slope, const VectorX<Scalar>& params,
                   const MatrixX<Scalar>& input, Index env, const NodeActivations<Scalar>& act,
                   const VectorX<Scalar>& residual, VectorX<Scalar>& grad) {
  grad.segment(l.predictor_offset(), l.hidden).noalias() += act.z * residual;
  grad(l.node_size() - 1) += residual.sum();
  const auto head = params.segment(l.predictor_offset(), l.hidden);
  act.dz.noalias() = head * residual.transpose();
  const Index comps[2] = {0, env + 1};
  for (int c = 0; c < 2; ++c) {
    const Index off = l.component_offset(comps[c]);
    component_backward(ComponentView<Scalar>(params.data() + off, l),
                       ComponentGradView<Scalar>(grad.data() + off, l), input, act.a1[c],
                       act.h1[c], act.a2[c], act.dz, slope, act.da2, act.dh1, act.da1);
  }
}

}  // namespace detail

/// Batched forward pass of node i in environment k over the columns of
/// `inputs` (d*lag x N): P_i(C_i(x) + I^i_k(x)).
template <typename Scalar>
ForwardTape<Scalar> forward_batch(const IgcModel<Scalar>& model, const MatrixX<Scalar>& inputs,
                                  Index env, Index node) {
  const NetLayout& l = model.layout();
  if (node < 0 || node >= l.dim) throw DataError("node index out of range");
  if (env < 0 || env >= l.envs) throw DataError("environment index out of range");
  if (inputs.rows() != l.input_size()) throw DataError("input window has the wrong size");

  ForwardTape<Scalar> tape;
  tape.node = node;
  tape.env = env;
  tape.version = model.version();
  tape.input = inputs;
  detail::node_forward(l, model.leaky_slope(), model.node(node), tape.input, env, tape);
  return tape;
}

/// Gradient of sum_t 1/2 * r_t^2 w.r.t. the node's parameters (node layout),
/// where `residual` holds prediction - target per column. Only the causal
/// component, the environment's intervention component and the head receive
/// non-zero entries.
template <typename Scalar>
VectorX<Scalar> backward_batch(const IgcModel<Scalar>& model, const ForwardTape<Scalar>& tape,
                               const VectorX<Scalar>& residual) {
  if (tape.version != model.version())
    throw DataError("stale forward tape: model parameters changed since the forward pass");
  if (residual.size() != tape.prediction.size()) throw DataError("residual size mismatch");
  const NetLayout& l = model.layout();
  VectorX<Scalar> grad = VectorX<Scalar>::Zero(l.node_size());
  detail::node_backward(l, model.leaky_slope(), model.node(tape.node), tape.input, tape.env, tape,
                        residual, grad);
  return grad;
}

/// Flattens a lag x d window (rows in time order, last row most recent) into
/// the network input ordering.
template <typename Scalar>
VectorX<Scalar> window_to_input(const MatrixX<Scalar>& window) {
  const Index lag = window.rows();
  const Index d = window.cols();
  VectorX<Scalar> x(d * lag);
  for (Index j = 0; j < d; ++j)
    for (Index p = 0; p < lag; ++p) x(j * lag + p) = window(lag - 1 - p, j);
  return x;
}

/// Single-window forward pass: next-step estimate of node i in environment k.
template <typename Scalar>
std::pair<Scalar, ForwardTape<Scalar>> forward(const IgcModel<Scalar>& model,
                                               const MatrixX<Scalar>& window, Index env,
                                               Index node) {
  if (window.rows() != model.layout().lag || window.cols() != model.layout().dim)
    throw DataError("window must be lag x d");
  auto tape = forward_batch(model, MatrixX<Scalar>(window_to_input(window)), env, node);
  const Scalar pred = tape.prediction(0);
  return {pred, std::move(tape)};
}

template <typename Scalar>
VectorX<Scalar> backward(const IgcModel<Scalar>& model, const ForwardTape<Scalar>& tape,
                         Scalar residual) {
  VectorX<Scalar> r(1);
  r(0) = residual;
  return backward_batch(model, tape, r);
}

// ---------------------------------------------------------------------------

using IgcModeld = IgcModel<double>;

IgcModeld fit_igc(const MultiEnvDataset& data, const FitConfig& cfg);

/// Penalized objective of a model on (already preprocessed) data, summed over
/// nodes.
double igc_objective(const IgcModeld& model, const MultiEnvDataset& data, const FitConfig& cfg);

GrangerGraph extract_graph(const IgcModeld& model, const FitConfig& cfg);
InterventionalFamily recover_targets(const IgcModeld& model, const FitConfig& cfg);

// Scores of the single lag p (1-based) pairs: norm of the first-layer
// weights reading x_{j, t-p} in node i's causal network.
Matrix lag_scores(const IgcModeld& model, Index p);

// Network inputs of one environment: column t is the window ending at
// x_{t+lag-1}, paired with target row t + lag.
Matrix window_inputs(const Matrix& series, Index lag);

}  // namespace igc
