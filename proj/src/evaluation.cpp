#include "igc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace igc {

namespace {

double ratio_or_zero(double num, double den) { return den > 0.0 ? num / den : 0.0; }

void ranked_metrics(EvalReport& r, const std::vector<int>& truth,
                    const std::vector<double>& scores) {
  const double pos = static_cast<double>(r.n_edges_true);
  const double neg = static_cast<double>(r.entries) - pos;
  if (pos == 0.0 || neg == 0.0) return;

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  double tp = 0.0, fp = 0.0;
  double roc_area = 0.0, pr_area = 0.0;
  double prev_tpr = 0.0, prev_fpr = 0.0, prev_recall = 0.0, prev_precision = -1.0;
  size_t idx = 0;
  while (idx < order.size()) {
    const double s = scores[order[idx]];
    while (idx < order.size() && scores[order[idx]] == s) {
      (truth[order[idx]] ? tp : fp) += 1.0;
      ++idx;
    }
    const double tpr = tp / pos;
    const double fpr = fp / neg;
    const double precision = tp / (tp + fp);
    roc_area += 0.5 * (fpr - prev_fpr) * (tpr + prev_tpr);
    if (prev_precision < 0.0) prev_precision = precision;
    pr_area += 0.5 * (tpr - prev_recall) * (precision + prev_precision);
    r.curve.push_back({s, tpr, fpr, precision});
    prev_tpr = tpr;
    prev_fpr = fpr;
    prev_recall = tpr;
    prev_precision = precision;
  }
  r.auroc = roc_area;
  r.auprc = pr_area;
}

}  // namespace

EvalReport score_entries(const std::vector<int>& pred, const std::vector<int>& truth,
                         const std::vector<double>* scores) {
  if (pred.size() != truth.size()) throw DataError("prediction and truth sizes differ");
  if (scores && scores->size() != truth.size()) throw DataError("score and truth sizes differ");
  EvalReport r;
  r.entries = static_cast<long>(truth.size());
  for (size_t e = 0; e < truth.size(); ++e) {
    const bool p = pred[e] != 0, t = truth[e] != 0;
    r.tp += p && t;
    r.fp += p && !t;
    r.fn += !p && t;
    r.tn += !p && !t;
  }
  r.n_edges_true = r.tp + r.fn;
  r.n_edges_pred = r.tp + r.fp;
  r.shd = r.fp + r.fn;
  r.accuracy = r.entries ? static_cast<double>(r.tp + r.tn) / static_cast<double>(r.entries) : 1.0;
  if (r.tp + r.fp + r.fn == 0) {
    // Both sides empty: perfect agreement.
    r.precision = r.recall = r.f1 = 1.0;
  } else {
    r.precision = ratio_or_zero(r.tp, r.tp + r.fp);
    r.recall = ratio_or_zero(r.tp, r.tp + r.fn);
    r.f1 = 2.0 * r.tp / static_cast<double>(2 * r.tp + r.fp + r.fn);
  }
  if (scores) ranked_metrics(r, truth, *scores);
  return r;
}

EvalReport score_graph(const GrangerGraph& pred, const GrangerGraph& truth,
                       bool include_diagonal) {
  const Index d = truth.dim();
  if (pred.dim() != d || pred.adjacency.cols() != truth.adjacency.cols())
    throw DataError("predicted and true graphs differ in dimension");
  std::vector<int> p, t;
  std::vector<double> s;
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) {
      if (!include_diagonal && i == j) continue;
      p.push_back(pred.adjacency(i, j));
      t.push_back(truth.adjacency(i, j));
      if (pred.scores) s.push_back((*pred.scores)(i, j));
    }
  EvalReport r = score_entries(p, t, pred.scores ? &s : nullptr);
  r.threshold = pred.threshold;
  r.include_diagonal = include_diagonal;
  return r;
}

TargetReport score_targets(const InterventionalFamily& pred, const InterventionalFamily& truth) {
  if (pred.num_envs() != truth.num_envs())
    throw DataError("interventional families differ in environment count");
  TargetReport out;
  std::vector<int> all_p, all_t;
  for (Index k = 0; k < truth.num_envs(); ++k) {
    const auto& P = pred.targets[static_cast<size_t>(k)];
    const auto& T = truth.targets[static_cast<size_t>(k)];
    if (P.rows() != T.rows() || P.cols() != T.cols())
      throw DataError("target matrices differ in shape");
    std::vector<int> p(P.data(), P.data() + P.size()), t(T.data(), T.data() + T.size());
    out.per_env.push_back(score_entries(p, t, nullptr));
    all_p.insert(all_p.end(), p.begin(), p.end());
    all_t.insert(all_t.end(), t.begin(), t.end());
    out.env_predicted.push_back(P.any() ? 1 : 0);
    out.env_truth.push_back(T.any() ? 1 : 0);
  }
  out.pooled = score_entries(all_p, all_t, nullptr);
  long agree = 0;
  for (size_t k = 0; k < out.env_truth.size(); ++k) agree += out.env_predicted[k] == out.env_truth[k];
  out.env_accuracy = out.env_truth.empty()
                         ? 1.0
                         : static_cast<double>(agree) / static_cast<double>(out.env_truth.size());
  return out;
}

nlohmann::json to_json(const EvalReport& r, bool with_curve) {
  nlohmann::json j{{"accuracy", r.accuracy},
                   {"precision", r.precision},
                   {"recall", r.recall},
                   {"f1", r.f1},
                   {"shd", r.shd},
                   {"tp", r.tp},
                   {"fp", r.fp},
                   {"fn", r.fn},
                   {"tn", r.tn},
                   {"n_edges_true", r.n_edges_true},
                   {"n_edges_pred", r.n_edges_pred},
                   {"entries", r.entries},
                   {"threshold", r.threshold},
                   {"include_diagonal", r.include_diagonal}};
  j["auroc"] = r.auroc ? nlohmann::json(*r.auroc) : nlohmann::json(nullptr);
  j["auprc"] = r.auprc ? nlohmann::json(*r.auprc) : nlohmann::json(nullptr);
  if (with_curve) {
    j["curve"] = nlohmann::json::array();
    for (const auto& c : r.curve)
      j["curve"].push_back({{"threshold", c.threshold},
                            {"tpr", c.tpr},
                            {"fpr", c.fpr},
                            {"precision", c.precision}});
  }
  return j;
}

nlohmann::json to_json(const TargetReport& r) {
  nlohmann::json j;
  j["pooled"] = to_json(r.pooled);
  j["per_env"] = nlohmann::json::array();
  for (const auto& e : r.per_env) j["per_env"].push_back(to_json(e));
  j["env_predicted"] = r.env_predicted;
  j["env_truth"] = r.env_truth;
  j["env_accuracy"] = r.env_accuracy;
  return j;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd m;
  if (values.empty()) return m;
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - m.mean) * (v - m.mean);
  m.std = std::sqrt(sq / static_cast<double>(values.size()));
  return m;
}

}  // namespace igc
