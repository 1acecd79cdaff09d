#pragma once

#include "igc/types.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace igc {

struct SyntheticData {
  MultiEnvDataset data;
  GrangerGraph truth;
  InterventionalFamily targets;
};

struct LinearGenConfig {
  Index n_nodes = 5;
  double edge_prob = 0.4;
  Index n_envs = 5;
  Index T = 500;
  double weight_low = 0.4;
  double weight_high = 0.6;
  // Delta magnitudes are drawn from (interv_low, interv_high] with a random sign.
  double interv_low = 0.0;
  double interv_high = 0.15;
  Index interv_time = 200;
  double noise_scale = 1.0;
  bool self_loops = true;
  // Environments receiving an intervention; empty means all but environment 0.
  std::optional<std::vector<Index>> intervened_envs;
  Index targets_per_env = 1;
  // Prefer target nodes no earlier environment has used; reuse only once the
  // candidates run out.
  bool distinct_targets = false;
  Index burn_in = 100;
  double max_spectral_radius = 0.95;
  int max_retries = 1000;
  std::uint64_t seed = 0;

  void validate() const;
  std::vector<Index> intervened() const;
};

struct NonlinearGenConfig : LinearGenConfig {
  double leaky_slope = 0.1;
  Index gen_hidden = 4;  // hidden units of each node's generating network
  double divergence_bound = 1e3;
};

/// Two-layer generating network of one node: f(x_PA) = w2 . leaky(W1 x_PA + b1) + b2.
struct NodeMechanism {
  std::vector<Index> parents;
  Matrix W1;  // gen_hidden x |parents|
  Vector b1;
  Vector w2;
  double b2 = 0.0;

  double evaluate(const Vector& state, double leaky_slope,
                  const Vector* w2_override = nullptr) const;
};

struct NonlinearSyntheticData : SyntheticData {
  std::vector<NodeMechanism> mechanisms;
  // Per environment: additive perturbation of each node's second layer
  // (empty vectors for nodes that are not targeted).
  std::vector<std::vector<Vector>> perturbations;
};

struct LinearSyntheticData : SyntheticData {
  Matrix weights;              // base VAR(1) matrix, row = effect
  std::vector<Matrix> deltas;  // per environment, applied from interv_time on
};

LinearSyntheticData gen_linear(const LinearGenConfig& cfg);
NonlinearSyntheticData gen_nonlinear(const NonlinearGenConfig& cfg);

/// Lorenz-96 right-hand side with cyclic indexing:
///   dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F
template <typename Derived>
VectorX<typename Derived::Scalar> lorenz_derivative(const Eigen::MatrixBase<Derived>& x,
                                                    typename Derived::Scalar F) {
  const Index m = x.size();
  if (m < 4) throw ConfigError("Lorenz-96 needs at least 4 variables");
  VectorX<typename Derived::Scalar> dx(m);
  for (Index i = 0; i < m; ++i) {
    const Index ip1 = (i + 1) % m;
    const Index im1 = (i + m - 1) % m;
    const Index im2 = (i + m - 2) % m;
    dx(i) = (x(ip1) - x(im2)) * x(im1) - x(i) + F;
  }
  return dx;
}

template <typename Derived>
VectorX<typename Derived::Scalar> lorenz_rk4_step(const Eigen::MatrixBase<Derived>& x,
                                                  typename Derived::Scalar F,
                                                  typename Derived::Scalar dt) {
  using Scalar = typename Derived::Scalar;
  const VectorX<Scalar> k1 = lorenz_derivative(x, F);
  const VectorX<Scalar> k2 = lorenz_derivative((x + Scalar(0.5) * dt * k1).eval(), F);
  const VectorX<Scalar> k3 = lorenz_derivative((x + Scalar(0.5) * dt * k2).eval(), F);
  const VectorX<Scalar> k4 = lorenz_derivative((x + dt * k3).eval(), F);
  return x + dt / Scalar(6) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
}

struct LorenzConfig {
  Index m = 20;
  Index T = 500;
  double F_base = 40.0;
  double F_interv = 50.0;
  Index switch_time = 250;  // observations with index t > switch_time use F_interv
  double dt = 0.01;
  Index subsample = 5;
  Index burn_in = 1000;  // integration steps discarded before recording
  double noise_scale = 0.0;
  double init_scale = 0.01;  // initial state F + N(0, init_scale^2)
  std::optional<Vector> initial_state;
  double blowup_bound = 1e6;
  std::uint64_t seed = 0;

  void validate() const;
};

SyntheticData gen_lorenz(const LorenzConfig& cfg);

// Lorenz-96 stencil: adjacency(i, j) = 1 for j in {i-2, i-1, i, i+1} mod m.
BinaryMatrix lorenz_truth(Index m);

}  // namespace igc
