#include "igc/dataset_io.hpp"
#include "igc/linear_granger.hpp"
#include "igc/synthetic.hpp"
#include "igc/evaluation.hpp"

#include <doctest.h>

#include <random>

using namespace igc;

namespace {

// Noiseless VAR(1) run from a random start. W is a scaled rotation so the
// trajectory keeps exciting every direction.
MultiEnvDataset noiseless_var(const Matrix& W, Index T, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  Matrix X(T, W.rows());
  Vector x(W.rows());
  for (Index i = 0; i < x.size(); ++i) x(i) = N(rng);
  for (Index t = 0; t < T; ++t) {
    X.row(t) = x.transpose();
    x = W * x;
  }
  return MultiEnvDataset({X});
}

Matrix rotation3(double scale) {
  const double a = 0.7, b = 0.4;
  Matrix Rz(3, 3), Rx(3, 3);
  Rz << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  Rx << 1, 0, 0, 0, std::cos(b), -std::sin(b), 0, std::sin(b), std::cos(b);
  return scale * Rz * Rx;
}

FitConfig exact_config() {
  FitConfig c;
  c.lambda = 0.0;
  c.standardize = false;
  c.tol = 0.0;
  c.max_iters = 20000;
  c.step_size = 10.0;
  return c;
}

}  // namespace

TEST_CASE("lagged design layout: column j * lag + p holds series j at lag p + 1") {
  Matrix X(5, 2);
  X << 1, 10, 2, 20, 3, 30, 4, 40, 5, 50;
  const Matrix Z = lagged_design(X, 2);
  REQUIRE(Z.rows() == 3);
  REQUIRE(Z.cols() == 4);
  // Row 0 predicts x_2 = (3, 30) from x_1 and x_0.
  CHECK(Z(0, 0) == 2);
  CHECK(Z(0, 1) == 1);
  CHECK(Z(0, 2) == 20);
  CHECK(Z(0, 3) == 10);
  CHECK(Z(2, 0) == 4);
  CHECK(Z(2, 3) == 30);
}

TEST_CASE("single environment, no penalty: noiseless AR(1) recovers the generator (least squares limit)") {
  const Matrix W = rotation3(0.97);
  const MultiEnvDataset data = noiseless_var(W, 120, 1);
  // Closed-form least squares with an intercept column, as an oracle.
  const Matrix& X = data.env(0);
  Matrix Z(X.rows() - 1, 4);
  Z.leftCols(3) = X.topRows(X.rows() - 1);
  Z.col(3).setOnes();
  const Matrix ls = (Z.transpose() * Z).ldlt().solve(Z.transpose() * X.bottomRows(X.rows() - 1));
  REQUIRE((ls.topRows(3).transpose() - W).cwiseAbs().maxCoeff() < 1e-8);

  const LinearParams p = fit_linear(data, exact_config());
  CHECK_FALSE(p.has_deltas);
  CHECK((p.W0 - W).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(p.intercepts.cwiseAbs().maxCoeff() < 1e-6);
  for (const auto& D : p.deltas) CHECK(D.isZero(0.0));
  // Support of the generator.
  FitConfig cfg = exact_config();
  cfg.edge_threshold = 1e-3;
  const auto [graph, fam] = extract_linear_graph(p, cfg);
  CHECK(graph.adjacency == (W.array().abs() > 1e-3).cast<int>().matrix());
}

TEST_CASE("large lambda zeroes every group exactly") {
  LinearGenConfig g;
  g.seed = 5;
  const auto sd = gen_linear(g);
  FitConfig cfg;
  cfg.lambda = 100.0;
  const LinearParams p = fit_linear(sd.data, cfg);
  CHECK(p.W0.isZero(0.0));
  for (const auto& D : p.deltas) CHECK(D.isZero(0.0));
  const auto [graph, fam] = extract_linear_graph(p, cfg);
  CHECK(graph.num_edges() == 0);
  for (Index k = 0; k < fam.num_envs(); ++k) CHECK_FALSE(fam.intervened(k));
}

TEST_CASE("objective trace never increases and ends at the reported objective") {
  LinearGenConfig g;
  g.seed = 6;
  const auto sd = gen_linear(g);
  FitConfig cfg;
  cfg.lambda = 0.2;
  cfg.seed = 99;  // random start, so the trace has somewhere to go
  cfg.max_iters = 3000;
  const LinearParams p = fit_linear(sd.data, cfg);
  REQUIRE(p.trace.size() > 2);
  for (size_t t = 1; t < p.trace.size(); ++t) CHECK(p.trace[t] <= p.trace[t - 1] + 1e-12 * std::abs(p.trace[t - 1]));
  CHECK(linear_objective(p, standardize(sd.data), cfg) ==
        doctest::Approx(p.trace.back()).epsilon(1e-10));
}

TEST_CASE("convex problem: different starting points reach the same optimum") {
  LinearGenConfig g;
  g.seed = 7;
  const auto sd = gen_linear(g);
  FitConfig cfg;
  cfg.lambda = 0.3;
  cfg.tol = 1e-13;
  cfg.max_iters = 20000;
  cfg.step_growth = 1.2;
  const LinearParams a = fit_linear(sd.data, cfg);
  cfg.seed = 1234;
  const LinearParams b = fit_linear(sd.data, cfg);
  CHECK(a.converged);
  CHECK(b.converged);
  CHECK((a.W0 - b.W0).cwiseAbs().maxCoeff() < 1e-4);
  for (size_t k = 0; k < a.deltas.size(); ++k)
    CHECK((a.deltas[k] - b.deltas[k]).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(std::abs(a.trace.back() - b.trace.back()) < 1e-9 * std::abs(a.trace.back()));

  // No small random perturbation improves the objective.
  const MultiEnvDataset s = standardize(sd.data);
  const double best = linear_objective(a, s, cfg);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N(0.0, 1e-3);
  for (int rep = 0; rep < 50; ++rep) {
    LinearParams q = a;
    for (Index i = 0; i < q.W0.rows(); ++i)
      for (Index c = 0; c < q.W0.cols(); ++c) q.W0(i, c) += N(rng);
    for (auto& D : q.deltas)
      for (Index i = 0; i < D.rows(); ++i)
        for (Index c = 0; c < D.cols(); ++c) D(i, c) += N(rng);
    CHECK(linear_objective(q, s, cfg) >= best - 1e-10);
  }
}

TEST_CASE("permuting environments permutes the deltas") {
  LinearGenConfig g;
  g.seed = 8;
  const auto sd = gen_linear(g);
  FitConfig cfg;
  cfg.lambda = 0.3;
  cfg.tol = 1e-13;
  cfg.max_iters = 20000;
  const LinearParams a = fit_linear(sd.data, cfg);
  const std::vector<Index> perm{3, 0, 4, 1, 2};
  std::vector<Matrix> envs;
  for (Index k : perm) envs.push_back(sd.data.env(k));
  const LinearParams b = fit_linear(MultiEnvDataset(envs), cfg);
  CHECK((a.W0 - b.W0).cwiseAbs().maxCoeff() < 1e-6);
  for (size_t k = 0; k < perm.size(); ++k)
    CHECK((b.deltas[k] - a.deltas[static_cast<size_t>(perm[k])]).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("graph extraction from hand-set parameters") {
  LinearParams p;
  p.lag = 2;
  p.W0 = Matrix::Zero(3, 6);
  p.deltas.assign(2, Matrix::Zero(3, 6));
  p.intercepts = Matrix::Zero(3, 2);
  FitConfig cfg;
  SUBCASE("all-zero parameters give an empty graph and family") {
    const auto [graph, fam] = extract_linear_graph(p, cfg);
    CHECK(graph.num_edges() == 0);
    CHECK_FALSE(fam.intervened(0));
    CHECK_FALSE(fam.intervened(1));
  }
  SUBCASE("edges follow lag-group norms; zero deltas mark non-intervened environments") {
    p.W0(1, 2 * 2 + 1) = 0.5;  // series 2 -> 1 at lag 2
    p.W0(0, 0) = 1e-4;         // below threshold
    p.deltas[1](2, 0) = -0.3;
    const auto [graph, fam] = extract_linear_graph(p, cfg);
    CHECK(graph.num_edges() == 1);
    CHECK(graph.adjacency(1, 2) == 1);
    REQUIRE(graph.scores);
    CHECK((*graph.scores)(1, 2) == doctest::Approx(0.5));
    CHECK_FALSE(fam.intervened(0));
    CHECK(fam.intervened(1));
    CHECK(fam.targets[1](2, 0) == 1);
    cfg.target_threshold = 0.5;
    const auto [g2, f2] = extract_linear_graph(p, cfg);
    CHECK_FALSE(f2.intervened(1));
  }
}

TEST_CASE("short environments are rejected before fitting") {
  MultiEnvDataset data({Matrix::Random(4, 2)});
  FitConfig cfg;
  cfg.lag = 3;
  CHECK_THROWS_AS(fit_linear(data, cfg), DataError);
}

TEST_CASE("linear estimator recovers a 5-node interventional graph") {
  LinearGenConfig g;
  g.seed = 21;
  const auto sd = gen_linear(g);
  FitConfig cfg;
  cfg.lambda = 0.5;
  cfg.alpha = 0.5;
  cfg.max_iters = 3000;
  const LinearParams p = fit_linear(sd.data, cfg);
  const auto [graph, fam] = extract_linear_graph(p, cfg);
  const EvalReport r = score_graph(graph, sd.truth);
  CHECK(r.shd <= 1);
  REQUIRE(r.auroc);
  CHECK(*r.auroc >= 0.95);
}
