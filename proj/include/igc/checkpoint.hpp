#pragma once

#include "igc/linear_granger.hpp"
#include "igc/neural_igc.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace igc {

nlohmann::json to_json(const FitConfig& cfg);

// Overlays the keys present in `j` onto `base`. Unknown keys and wrongly
// typed values are ConfigErrors.
FitConfig fit_config_from_json(const nlohmann::json& j, FitConfig base = {});

/// A fitted model on disk: manifest.json plus one CSV per weight matrix and
/// trace.csv. Files depend only on the fitted values, so identical fits give
/// byte-identical directories.
struct Checkpoint {
  std::string model;  // "linear" or "igc"
  FitConfig config;
  std::optional<LinearParams> linear;
  std::optional<IgcModeld> igc;

  bool converged() const;
  const std::vector<double>& trace() const;
};

void save_checkpoint(const std::filesystem::path& dir, const LinearParams& params,
                     const FitConfig& cfg);
void save_checkpoint(const std::filesystem::path& dir, const IgcModeld& model);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

void write_trace(const std::filesystem::path& path, const std::vector<double>& trace);

}  // namespace igc
