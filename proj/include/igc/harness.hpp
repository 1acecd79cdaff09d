#pragma once

#include "igc/checkpoint.hpp"
#include "igc/evaluation.hpp"
#include "igc/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace igc {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNotConverged = 4,
  kExitNumerical = 5,
};

/// Master-seed split: a pure function of (master, experiment name, index), so
/// adding experiments or seeds never changes the seeds of existing cells.
std::uint64_t derive_seed(std::uint64_t master, const std::string& name, std::uint64_t index);

/// Dataset source. Families "linear", "nonlinear" and "lorenz" generate data
/// from `params`; "manifest" loads an external dataset and its truth matrix.
struct DatasetSpec {
  std::string family = "linear";
  nlohmann::json params = nlohmann::json::object();
  std::filesystem::path manifest;
  std::filesystem::path truth;
};

const std::vector<std::string>& dataset_families();

LinearGenConfig linear_gen_from_json(const nlohmann::json& j);
NonlinearGenConfig nonlinear_gen_from_json(const nlohmann::json& j);
LorenzConfig lorenz_gen_from_json(const nlohmann::json& j);

SyntheticData make_dataset(const DatasetSpec& spec, std::uint64_t seed);

/// Writes env<k>.csv, manifest.json, truth.csv and targets_env<k>.csv.
std::filesystem::path write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

Checkpoint fit_model(const MultiEnvDataset& data, const std::string& model, const FitConfig& cfg);

struct Prediction {
  GrangerGraph graph;
  std::optional<InterventionalFamily> targets;  // absent for linear fits without deltas
};
Prediction predict(const Checkpoint& ck);

struct Experiment {
  std::string name;
  DatasetSpec dataset;
  std::string model = "igc";
  FitConfig fit;
};

struct BenchmarkConfig {
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> seed_indices{0, 1, 2};
  bool include_diagonal = true;
  std::vector<Experiment> experiments;
};

// Relative manifest/truth paths resolve against `base`.
BenchmarkConfig benchmark_config_from_json(const nlohmann::json& j,
                                           const std::filesystem::path& base = {});

struct CellResult {
  std::string experiment;
  std::uint64_t seed_index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  bool converged = false;
  std::string error;
  EvalReport report;
};

/// Runs generate -> fit -> evaluate for every (experiment, seed) cell on up to
/// `jobs` threads, writing each cell under out/cells/<experiment>/seed<i>, and
/// returns the cells in configuration order. Failed cells are recorded, not
/// rethrown.
std::vector<CellResult> run_benchmark(const BenchmarkConfig& cfg, const std::filesystem::path& out,
                                      int jobs);

/// One row per experiment, mean and population std per metric over the
/// successful cells.
std::string benchmark_table(const BenchmarkConfig& cfg, const std::vector<CellResult>& cells);

/// Command-line entry point; returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace igc
