#pragma once

#include "igc/types.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace igc {

struct CurvePoint {
  double threshold;
  double tpr;
  double fpr;
  double precision;
};

struct EvalReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> auroc;  // absent without scores or with degenerate truth
  std::optional<double> auprc;
  long shd = 0;
  long tp = 0, fp = 0, fn = 0, tn = 0;
  long n_edges_true = 0;
  long n_edges_pred = 0;
  long entries = 0;
  double threshold = 0.0;
  bool include_diagonal = true;
  std::vector<CurvePoint> curve;
};

/// Binary metrics over the d^2 entries (d^2 - d without the diagonal), plus
/// AUROC/AUPRC by sweeping every distinct score of `pred` as a threshold
/// (trapezoidal rule, tied scores grouped).
EvalReport score_graph(const GrangerGraph& pred, const GrangerGraph& truth,
                       bool include_diagonal = true);

/// Same metrics from raw entry lists; the building block of score_graph.
EvalReport score_entries(const std::vector<int>& pred, const std::vector<int>& truth,
                         const std::vector<double>* scores);

struct TargetReport {
  std::vector<EvalReport> per_env;
  EvalReport pooled;
  std::vector<int> env_predicted;  // environment flagged intervened
  std::vector<int> env_truth;
  double env_accuracy = 0.0;
};

TargetReport score_targets(const InterventionalFamily& pred, const InterventionalFamily& truth);

nlohmann::json to_json(const EvalReport& r, bool with_curve = false);
nlohmann::json to_json(const TargetReport& r);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};
MeanStd mean_std(const std::vector<double>& values);

}  // namespace igc
