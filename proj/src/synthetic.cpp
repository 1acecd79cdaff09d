#include "igc/synthetic.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

namespace igc {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double random_sign(Rng& rng) { return std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0; }

// Magnitude in [lo, hi] with a random sign.
double banded(Rng& rng, double lo, double hi) { return random_sign(rng) * uniform(rng, lo, hi); }

// Magnitude in (lo, hi] with a random sign.
double delta_draw(Rng& rng, double lo, double hi) {
  return random_sign(rng) * (hi - uniform(rng, 0.0, 1.0) * (hi - lo));
}

double spectral_radius(const Matrix& w) {
  Eigen::EigenSolver<Matrix> es(w, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

BinaryMatrix sample_graph(const LinearGenConfig& cfg, Rng& rng) {
  const Index d = cfg.n_nodes;
  BinaryMatrix adj = BinaryMatrix::Zero(d, d);
  std::bernoulli_distribution edge(cfg.edge_prob);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) adj(i, j) = (i == j) ? (cfg.self_loops ? 1 : 0) : edge(rng);
  return adj;
}

// Target nodes per environment (empty for non-intervened environments).
std::vector<std::vector<Index>> sample_target_nodes(const LinearGenConfig& cfg,
                                                    const BinaryMatrix& adj, Rng& rng) {
  std::vector<Index> candidates;
  for (Index i = 0; i < adj.rows(); ++i)
    if (adj.row(i).any()) candidates.push_back(i);
  std::vector<std::vector<Index>> nodes(static_cast<size_t>(cfg.n_envs));
  std::vector<char> used(static_cast<size_t>(adj.rows()), 0);
  for (Index k : cfg.intervened()) {
    std::vector<Index> pool = candidates;
    std::shuffle(pool.begin(), pool.end(), rng);
    if (cfg.distinct_targets)
      std::stable_partition(pool.begin(), pool.end(),
                            [&](Index i) { return !used[static_cast<size_t>(i)]; });
    const auto count = std::min<size_t>(pool.size(), static_cast<size_t>(cfg.targets_per_env));
    nodes[static_cast<size_t>(k)].assign(pool.begin(), pool.begin() + static_cast<long>(count));
    std::sort(nodes[static_cast<size_t>(k)].begin(), nodes[static_cast<size_t>(k)].end());
    for (Index i : nodes[static_cast<size_t>(k)]) used[static_cast<size_t>(i)] = 1;
  }
  return nodes;
}

InterventionalFamily family_from_nodes(const std::vector<std::vector<Index>>& nodes,
                                       const BinaryMatrix& adj) {
  InterventionalFamily fam = InterventionalFamily::zeros(static_cast<Index>(nodes.size()),
                                                         adj.rows());
  for (size_t k = 0; k < nodes.size(); ++k)
    for (Index i : nodes[k]) fam.targets[k].row(i) = adj.row(i);
  return fam;
}

}  // namespace

void LinearGenConfig::validate() const {
  if (n_nodes < 1) throw ConfigError("n_nodes must be >= 1");
  if (!(edge_prob >= 0.0 && edge_prob <= 1.0)) throw ConfigError("edge_prob must lie in [0, 1]");
  if (n_envs < 1) throw ConfigError("n_envs must be >= 1");
  if (T < 3) throw ConfigError("T must be >= 3");
  if (!(weight_low >= 0.0 && weight_high >= weight_low))
    throw ConfigError("weight band must satisfy 0 <= low <= high");
  if (!(interv_low >= 0.0 && interv_high > interv_low))
    throw ConfigError("intervention band must satisfy 0 <= low < high");
  if (interv_time < 0 || interv_time >= T) throw ConfigError("interv_time must lie in [0, T)");
  if (!(noise_scale >= 0.0)) throw ConfigError("noise_scale must be >= 0");
  if (targets_per_env < 0) throw ConfigError("targets_per_env must be >= 0");
  if (max_retries < 1) throw ConfigError("max_retries must be >= 1");
  for (Index k : intervened())
    if (k < 0 || k >= n_envs) throw ConfigError("intervened environment index out of range");
}

std::vector<Index> LinearGenConfig::intervened() const {
  if (intervened_envs) return *intervened_envs;
  std::vector<Index> ks;
  for (Index k = 1; k < n_envs; ++k) ks.push_back(k);
  return ks;
}

LinearSyntheticData gen_linear(const LinearGenConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const Index d = cfg.n_nodes;
  const BinaryMatrix adj = sample_graph(cfg, rng);
  const auto target_nodes = sample_target_nodes(cfg, adj, rng);

  Matrix W(d, d);
  std::vector<Matrix> deltas;
  bool stable = false;
  for (int attempt = 0; attempt < cfg.max_retries && !stable; ++attempt) {
    W.setZero();
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j)
        if (adj(i, j)) W(i, j) = banded(rng, cfg.weight_low, cfg.weight_high);
    deltas.assign(static_cast<size_t>(cfg.n_envs), Matrix::Zero(d, d));
    for (size_t k = 0; k < target_nodes.size(); ++k)
      for (Index i : target_nodes[k])
        for (Index j = 0; j < d; ++j)
          if (adj(i, j)) deltas[k](i, j) = delta_draw(rng, cfg.interv_low, cfg.interv_high);
    stable = spectral_radius(W) < cfg.max_spectral_radius;
    for (size_t k = 0; k < deltas.size() && stable; ++k)
      if ((deltas[k].array() != 0.0).any())
        stable = spectral_radius(W + deltas[k]) < cfg.max_spectral_radius;
  }
  if (!stable) {
    std::ostringstream os;
    os << "no stable VAR weights found in " << cfg.max_retries
       << " attempts (spectral radius guard " << cfg.max_spectral_radius << ")";
    throw NumericalError(os.str());
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<Matrix> envs;
  for (Index k = 0; k < cfg.n_envs; ++k) {
    const Matrix W_post = W + deltas[static_cast<size_t>(k)];
    Matrix X(cfg.T, d);
    Vector x = Vector::Zero(d);
    Vector eps(d);
    auto step = [&](const Matrix& M) {
      for (Index i = 0; i < d; ++i) eps(i) = cfg.noise_scale * noise(rng);
      x = M * x + eps;
    };
    for (Index b = 0; b < cfg.burn_in; ++b) step(W);
    for (Index t = 0; t < cfg.T; ++t) {
      step(t >= cfg.interv_time ? W_post : W);
      X.row(t) = x.transpose();
    }
    envs.push_back(std::move(X));
  }

  LinearSyntheticData out{
      {MultiEnvDataset(std::move(envs)), GrangerGraph{adj, std::nullopt, 0.0},
       family_from_nodes(target_nodes, adj)},
      W,
      std::move(deltas)};
  return out;
}

double NodeMechanism::evaluate(const Vector& state, double leaky_slope,
                               const Vector* w2_override) const {
  Vector a = b1;
  for (size_t p = 0; p < parents.size(); ++p)
    a += W1.col(static_cast<Index>(p)) * state(parents[p]);
  for (Index h = 0; h < a.size(); ++h)
    if (a(h) < 0.0) a(h) *= leaky_slope;
  const Vector& w2_used = w2_override ? *w2_override : w2;
  return w2_used.dot(a) + b2;
}

NonlinearSyntheticData gen_nonlinear(const NonlinearGenConfig& cfg) {
  cfg.validate();
  if (cfg.gen_hidden < 1) throw ConfigError("gen_hidden must be >= 1");
  Rng rng(cfg.seed);
  const Index d = cfg.n_nodes;
  const Index H = cfg.gen_hidden;
  const BinaryMatrix adj = sample_graph(cfg, rng);
  const auto target_nodes = sample_target_nodes(cfg, adj, rng);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<NodeMechanism> mech(static_cast<size_t>(d));
  std::vector<std::vector<Vector>> perturb;
  std::vector<Matrix> envs;
  bool ok = false;
  for (int attempt = 0; attempt < cfg.max_retries && !ok; ++attempt) {
    for (Index i = 0; i < d; ++i) {
      NodeMechanism& m = mech[static_cast<size_t>(i)];
      m.parents.clear();
      for (Index j = 0; j < d; ++j)
        if (adj(i, j)) m.parents.push_back(j);
      const Index np = static_cast<Index>(m.parents.size());
      m.W1.resize(H, np);
      m.b1.resize(H);
      m.w2.resize(H);
      for (Index c = 0; c < np; ++c)
        for (Index h = 0; h < H; ++h) m.W1(h, c) = banded(rng, cfg.weight_low, cfg.weight_high);
      for (Index h = 0; h < H; ++h) m.b1(h) = banded(rng, cfg.weight_low, cfg.weight_high);
      for (Index h = 0; h < H; ++h) m.w2(h) = banded(rng, cfg.weight_low, cfg.weight_high);
      m.b2 = banded(rng, cfg.weight_low, cfg.weight_high);
    }
    perturb.assign(static_cast<size_t>(cfg.n_envs), std::vector<Vector>(static_cast<size_t>(d)));
    for (size_t k = 0; k < target_nodes.size(); ++k)
      for (Index i : target_nodes[k]) {
        Vector v(H);
        for (Index h = 0; h < H; ++h) v(h) = normal(rng);
        perturb[k][static_cast<size_t>(i)] = v;
      }

    envs.clear();
    ok = true;
    for (Index k = 0; k < cfg.n_envs && ok; ++k) {
      std::vector<Vector> w2_post(static_cast<size_t>(d));
      for (Index i = 0; i < d; ++i) {
        const Vector& p = perturb[static_cast<size_t>(k)][static_cast<size_t>(i)];
        if (p.size() > 0) w2_post[static_cast<size_t>(i)] = mech[static_cast<size_t>(i)].w2 + p;
      }
      Matrix X(cfg.T, d);
      Vector x = Vector::Zero(d);
      Vector next(d);
      for (Index t = -cfg.burn_in; t < cfg.T && ok; ++t) {
        const bool post = t >= cfg.interv_time;
        for (Index i = 0; i < d; ++i) {
          const auto& m = mech[static_cast<size_t>(i)];
          const Vector* w2o = (post && w2_post[static_cast<size_t>(i)].size() > 0)
                                  ? &w2_post[static_cast<size_t>(i)]
                                  : nullptr;
          next(i) = m.evaluate(x, cfg.leaky_slope, w2o) + cfg.noise_scale * normal(rng);
        }
        x = next;
        if (!x.allFinite() || x.cwiseAbs().maxCoeff() > cfg.divergence_bound) ok = false;
        if (t >= 0) X.row(t) = x.transpose();
      }
      envs.push_back(std::move(X));
    }
  }
  if (!ok) {
    std::ostringstream os;
    os << "non-linear dynamics diverged in all " << cfg.max_retries << " attempts";
    throw NumericalError(os.str());
  }

  NonlinearSyntheticData out;
  out.data = MultiEnvDataset(std::move(envs));
  out.truth = GrangerGraph{adj, std::nullopt, 0.0};
  out.targets = family_from_nodes(target_nodes, adj);
  out.mechanisms = std::move(mech);
  out.perturbations = std::move(perturb);
  return out;
}

void LorenzConfig::validate() const {
  if (m < 4) throw ConfigError("Lorenz-96 needs m >= 4");
  if (T < 3) throw ConfigError("T must be >= 3");
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  if (subsample < 1) throw ConfigError("subsample must be >= 1");
  if (burn_in < 0) throw ConfigError("burn_in must be >= 0");
  if (!(noise_scale >= 0.0)) throw ConfigError("noise_scale must be >= 0");
  if (initial_state && initial_state->size() != m)
    throw ConfigError("initial_state length must equal m");
}

BinaryMatrix lorenz_truth(Index m) {
  BinaryMatrix adj = BinaryMatrix::Zero(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index off : {-2, -1, 0, 1}) adj(i, (i + off + m) % m) = 1;
  return adj;
}

SyntheticData gen_lorenz(const LorenzConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Vector x(cfg.m);
  if (cfg.initial_state) {
    x = *cfg.initial_state;
  } else {
    for (Index i = 0; i < cfg.m; ++i) x(i) = cfg.F_base + cfg.init_scale * normal(rng);
  }
  auto guard = [&](Index t) {
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > cfg.blowup_bound) {
      std::ostringstream os;
      os << "Lorenz-96 integration blew up near observation " << t << "; try a smaller dt";
      throw NumericalError(os.str());
    }
  };
  for (Index s = 0; s < cfg.burn_in; ++s) x = lorenz_rk4_step(x, cfg.F_base, cfg.dt);
  guard(0);

  Matrix X(cfg.T, cfg.m);
  for (Index t = 0; t < cfg.T; ++t) {
    if (t > 0) {
      const double F = t > cfg.switch_time ? cfg.F_interv : cfg.F_base;
      for (Index s = 0; s < cfg.subsample; ++s) x = lorenz_rk4_step(x, F, cfg.dt);
      guard(t);
    }
    X.row(t) = x.transpose();
    if (cfg.noise_scale > 0.0)
      for (Index i = 0; i < cfg.m; ++i) X(t, i) += cfg.noise_scale * normal(rng);
  }

  SyntheticData out;
  const BinaryMatrix adj = lorenz_truth(cfg.m);
  out.data = MultiEnvDataset({std::move(X)});
  out.truth = GrangerGraph{adj, std::nullopt, 0.0};
  out.targets.targets = {adj};
  return out;
}

}  // namespace igc
