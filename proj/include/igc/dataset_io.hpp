#pragma once

#include "igc/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace igc {

struct CsvTable {
  Matrix values;
  std::vector<std::string> header;  // empty when the file has no header row
};

// The first line counts as a header iff none of its cells parse as numbers.
// Any other non-numeric cell is a DataError naming file, row and column.
CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const Matrix& values,
               const std::vector<std::string>& header = {});

BinaryMatrix read_binary_csv(const std::filesystem::path& path);
void write_binary_csv(const std::filesystem::path& path, const BinaryMatrix& m);

/// Loads a dataset from a JSON manifest:
///   { "d": 5, "environments": ["env0.csv", ...], "names": [...] }
/// Relative CSV paths resolve against the manifest's directory.
MultiEnvDataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes env<k>.csv files plus `manifest_name` into `dir` and returns the
/// manifest path.
std::filesystem::path save_dataset(const MultiEnvDataset& data,
                                   const std::filesystem::path& dir,
                                   const std::string& manifest_name = "manifest.json");

// Per environment, per series: zero mean, unit population variance.
// Constant series become all zeros.
MultiEnvDataset standardize(const MultiEnvDataset& data);

void write_family(const std::filesystem::path& dir, const InterventionalFamily& family);
InterventionalFamily read_family(const std::filesystem::path& dir, Index envs);

}  // namespace igc
