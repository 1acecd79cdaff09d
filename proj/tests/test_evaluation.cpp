#include "igc/evaluation.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace igc;

namespace {

GrangerGraph graph_of(const BinaryMatrix& a) {
  GrangerGraph g;
  g.adjacency = a;
  return g;
}

GrangerGraph scored(const Matrix& s, double threshold) { return GrangerGraph::from_scores(s, threshold); }

std::vector<int> flatten(const BinaryMatrix& m, bool diag) {
  std::vector<int> v;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (diag || i != j) v.push_back(m(i, j));
  return v;
}

std::vector<double> flatten(const Matrix& m, bool diag) {
  std::vector<double> v;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (diag || i != j) v.push_back(m(i, j));
  return v;
}

}  // namespace

TEST_CASE("metrics agree with direct counting on random 6 x 6 instances") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int rep = 0; rep < 500; ++rep) {
    const double density = 0.1 + 0.8 * U(rng);
    BinaryMatrix truth(6, 6);
    Matrix s(6, 6);
    for (Index i = 0; i < 6; ++i)
      for (Index j = 0; j < 6; ++j) {
        truth(i, j) = U(rng) < density;
        // Quantized scores force ties now and then.
        s(i, j) = std::round(U(rng) * 20.0) / 20.0;
      }
    const double thr = std::round(U(rng) * 20.0) / 20.0;
    const GrangerGraph pred = scored(s, thr);
    const bool diag = rep % 2 == 0;
    const EvalReport r = score_graph(pred, graph_of(truth), diag);
    const auto c = oracle::confusion(flatten(pred.adjacency, diag), flatten(truth, diag));
    CHECK(r.tp == c.tp);
    CHECK(r.fp == c.fp);
    CHECK(r.fn == c.fn);
    CHECK(r.tn == c.tn);
    CHECK(r.shd == c.shd);
    CHECK(std::abs(r.accuracy - c.accuracy) < 1e-12);
    CHECK(std::abs(r.precision - c.precision) < 1e-12);
    CHECK(std::abs(r.recall - c.recall) < 1e-12);
    CHECK(std::abs(r.f1 - c.f1) < 1e-12);
    CHECK(r.entries == (diag ? 36 : 30));
    const auto t = flatten(truth, diag);
    const long pos = std::count(t.begin(), t.end(), 1);
    if (pos == 0 || pos == static_cast<long>(t.size())) {
      CHECK_FALSE(r.auroc);
    } else {
      REQUIRE(r.auroc);
      CHECK(std::abs(*r.auroc - oracle::auroc_pairs(flatten(s, diag), t)) < 1e-12);
      CHECK(*r.auprc >= 0.0);
      CHECK(*r.auprc <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("worked example: two of four true edges found plus one false edge") {
  // precision 2/3, recall 1/2, F1 = 2 * (1/3) / (7/6) = 4/7
  BinaryMatrix truth = BinaryMatrix::Zero(3, 3), pred = BinaryMatrix::Zero(3, 3);
  truth(0, 1) = truth(0, 2) = truth(1, 2) = truth(2, 0) = 1;
  pred(0, 1) = pred(0, 2) = pred(1, 0) = 1;
  const EvalReport r = score_graph(graph_of(pred), graph_of(truth));
  CHECK(r.tp == 2);
  CHECK(r.fp == 1);
  CHECK(r.fn == 2);
  CHECK(r.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r.recall == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r.f1 == doctest::Approx(4.0 / 7.0).epsilon(1e-15));
  CHECK(r.shd == 3);
  CHECK(r.accuracy == doctest::Approx(6.0 / 9.0).epsilon(1e-15));
}

TEST_CASE("identical and complementary graphs") {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution B(0.4);
  BinaryMatrix a(5, 5);
  for (Index i = 0; i < 5; ++i)
    for (Index j = 0; j < 5; ++j) a(i, j) = B(rng);
  a(0, 0) = 1;
  a(0, 1) = 0;
  const EvalReport same = score_graph(graph_of(a), graph_of(a));
  CHECK(same.accuracy == 1.0);
  CHECK(same.f1 == 1.0);
  CHECK(same.shd == 0);
  const BinaryMatrix inv = (1 - a.array()).matrix();
  const EvalReport opp = score_graph(graph_of(inv), graph_of(a));
  CHECK(opp.accuracy == 0.0);
  CHECK(opp.f1 == 0.0);
  CHECK(opp.shd == 25);

  // Both empty counts as perfect agreement.
  const BinaryMatrix z = BinaryMatrix::Zero(4, 4);
  const EvalReport empty = score_graph(graph_of(z), graph_of(z));
  CHECK(empty.f1 == 1.0);
  CHECK(empty.precision == 1.0);
  CHECK(empty.recall == 1.0);
}

TEST_CASE("SHD equals (1 - accuracy) times the number of entries") {
  std::mt19937_64 rng(4);
  std::bernoulli_distribution B(0.3);
  for (int rep = 0; rep < 100; ++rep) {
    BinaryMatrix p(7, 7), t(7, 7);
    for (Index i = 0; i < 7; ++i)
      for (Index j = 0; j < 7; ++j) {
        p(i, j) = B(rng);
        t(i, j) = B(rng);
      }
    const EvalReport r = score_graph(graph_of(p), graph_of(t), rep % 2 == 0);
    CHECK(static_cast<double>(r.shd) ==
          doctest::Approx((1.0 - r.accuracy) * static_cast<double>(r.entries)).epsilon(1e-12));
  }
}

TEST_CASE("ranking metrics: perfect, inverted and monotone-transformed scores") {
  BinaryMatrix t = BinaryMatrix::Zero(4, 4);
  t(0, 1) = t(2, 3) = t(3, 0) = 1;
  Matrix s(4, 4);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j) s(i, j) = t(i, j) ? 2.0 + U(rng) : U(rng);

  const EvalReport perfect = score_graph(scored(s, 1.5), graph_of(t));
  CHECK(*perfect.auroc == 1.0);
  CHECK(*perfect.auprc == doctest::Approx(1.0).epsilon(1e-15));

  const Matrix inverted = (4.0 - s.array()).matrix();
  const EvalReport worst = score_graph(scored(inverted, 10.0), graph_of(t));
  CHECK(*worst.auroc == 0.0);

  // Only the ordering matters.
  Matrix mixed = s;
  mixed(0, 1) = 0.5;
  mixed(1, 1) = 2.5;
  const EvalReport base = score_graph(scored(mixed, 1.0), graph_of(t));
  const Matrix cubed = mixed.array().cube().matrix();
  const Matrix expd = (mixed.array().exp() * 3.0).matrix();
  const EvalReport r1 = score_graph(scored(cubed, 1.0), graph_of(t));
  const EvalReport r2 = score_graph(scored(expd, 1.0), graph_of(t));
  CHECK(*r1.auroc == *base.auroc);
  CHECK(*r2.auroc == *base.auroc);
  CHECK(*r1.auprc == *base.auprc);
  CHECK(*r2.auprc == *base.auprc);
  CHECK(*base.auroc < 1.0);
}

TEST_CASE("ranking metrics are absent without scores or with a degenerate truth") {
  const BinaryMatrix z = BinaryMatrix::Zero(3, 3);
  const BinaryMatrix full = BinaryMatrix::Ones(3, 3);
  const Matrix s = Matrix::Random(3, 3).cwiseAbs();
  CHECK_FALSE(score_graph(graph_of(z), graph_of(full)).auroc);
  CHECK_FALSE(score_graph(scored(s, 0.5), graph_of(z)).auroc);
  CHECK_FALSE(score_graph(scored(s, 0.5), graph_of(full)).auroc);
  const nlohmann::json j = to_json(score_graph(scored(s, 0.5), graph_of(z)));
  CHECK(j["auroc"].is_null());
}

TEST_CASE("shape mismatches are rejected") {
  CHECK_THROWS_AS(score_graph(graph_of(BinaryMatrix::Zero(3, 3)), graph_of(BinaryMatrix::Zero(4, 4))),
                  DataError);
  CHECK_THROWS_AS(score_entries({1, 0}, {1}, nullptr), DataError);
  const std::vector<double> s{0.1};
  CHECK_THROWS_AS(score_entries({1, 0}, {1, 0}, &s), DataError);
  CHECK_THROWS_AS(score_targets(InterventionalFamily::zeros(2, 3), InterventionalFamily::zeros(3, 3)),
                  DataError);
  CHECK_THROWS_AS(score_targets(InterventionalFamily::zeros(2, 3), InterventionalFamily::zeros(2, 4)),
                  DataError);
}

TEST_CASE("target scoring: per-environment, pooled and environment accuracy") {
  InterventionalFamily truth = InterventionalFamily::zeros(3, 3);
  truth.targets[1](2, 0) = 1;
  truth.targets[1](2, 2) = 1;

  SUBCASE("exact recovery") {
    const TargetReport r = score_targets(truth, truth);
    CHECK(r.env_accuracy == 1.0);
    CHECK(r.pooled.f1 == 1.0);
    CHECK(r.env_truth == std::vector<int>{0, 1, 0});
  }
  SUBCASE("one correct flag, one spurious environment") {
    InterventionalFamily pred = InterventionalFamily::zeros(3, 3);
    pred.targets[1](2, 0) = 1;
    pred.targets[2](0, 1) = 1;
    const TargetReport r = score_targets(pred, truth);
    CHECK(r.env_predicted == std::vector<int>{0, 1, 1});
    CHECK(r.env_accuracy == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(r.pooled.tp == 1);
    CHECK(r.pooled.fp == 1);
    CHECK(r.pooled.fn == 1);
    CHECK(r.per_env[1].recall == 0.5);
    CHECK(r.per_env[0].f1 == 1.0);
    const nlohmann::json j = to_json(r);
    CHECK(j["per_env"].size() == 3);
    CHECK(j["env_accuracy"].get<double>() == doctest::Approx(2.0 / 3.0));
  }
  SUBCASE("nothing predicted") {
    const TargetReport r = score_targets(InterventionalFamily::zeros(3, 3), truth);
    CHECK(r.pooled.recall == 0.0);
    CHECK(r.env_accuracy == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("mean and population standard deviation") {
  const MeanStd m = mean_std({2, 4, 4, 4, 5, 5, 7, 9});
  CHECK(m.mean == 5.0);
  CHECK(m.std == 2.0);
  const MeanStd one = mean_std({3.5});
  CHECK(one.mean == 3.5);
  CHECK(one.std == 0.0);
  const MeanStd none = mean_std({});
  CHECK(none.mean == 0.0);
}

TEST_CASE("report JSON carries every scalar metric and optionally the curve") {
  BinaryMatrix t = BinaryMatrix::Zero(3, 3);
  t(0, 1) = 1;
  Matrix s = Matrix::Zero(3, 3);
  s(0, 1) = 0.9;
  s(1, 0) = 0.3;
  const EvalReport r = score_graph(scored(s, 0.5), graph_of(t), false);
  const nlohmann::json j = to_json(r, true);
  for (const char* key : {"accuracy", "precision", "recall", "f1", "shd", "auroc", "auprc", "threshold",
                          "include_diagonal", "entries", "curve"})
    CHECK(j.contains(key));
  CHECK(j["entries"] == 6);
  CHECK(j["include_diagonal"] == false);
  CHECK(j["curve"].size() == r.curve.size());
  CHECK_FALSE(to_json(r).contains("curve"));
}
