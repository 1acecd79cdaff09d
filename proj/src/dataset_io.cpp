#include "igc/dataset_io.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace igc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  return os;
}

}  // namespace

CsvTable read_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());

  CsvTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  size_t line_no = 0;
  size_t width = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_row(line);
    if (rows.empty() && table.header.empty()) {
      bool any_numeric = false;
      double tmp;
      for (const auto& c : cells) any_numeric = any_numeric || parse_double(c, tmp);
      if (!any_numeric) {
        table.header = cells;
        width = cells.size();
        continue;
      }
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      std::ostringstream os;
      os << path.string() << ": row " << line_no << " has " << cells.size()
         << " columns, expected " << width;
      throw DataError(os.str());
    }
    std::vector<double> row(width);
    for (size_t c = 0; c < width; ++c) {
      if (!parse_double(cells[c], row[c]) || !std::isfinite(row[c])) {
        std::ostringstream os;
        os << path.string() << ": non-numeric value '" << cells[c] << "' at row " << line_no
           << ", column " << c + 1;
        throw DataError(os.str());
      }
    }
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < width; ++c)
      table.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return table;
}

void write_csv(const fs::path& path, const Matrix& values,
               const std::vector<std::string>& header) {
  auto os = open_out(path);
  if (!header.empty()) {
    for (size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
    os << '\n';
  }
  for (Index r = 0; r < values.rows(); ++r) {
    for (Index c = 0; c < values.cols(); ++c)
      os << (c ? "," : "") << format_double(values(r, c));
    os << '\n';
  }
}

BinaryMatrix read_binary_csv(const fs::path& path) {
  const Matrix m = read_csv(path).values;
  if (((m.array() != 0.0) && (m.array() != 1.0)).any())
    throw DataError(path.string() + ": matrix entries must be 0 or 1");
  return m.cast<int>();
}

void write_binary_csv(const fs::path& path, const BinaryMatrix& m) {
  auto os = open_out(path);
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) os << (c ? "," : "") << m(r, c);
    os << '\n';
  }
}

MultiEnvDataset load_dataset(const fs::path& manifest_path) {
  std::ifstream is(manifest_path);
  if (!is) throw DataError("cannot open manifest " + manifest_path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataError(manifest_path.string() + ": " + e.what());
  }
  if (!j.contains("environments") || !j["environments"].is_array() ||
      j["environments"].empty())
    throw DataError(manifest_path.string() + ": 'environments' must be a non-empty list");

  const fs::path base = manifest_path.parent_path();
  std::vector<Matrix> envs;
  std::vector<std::string> names;
  if (j.contains("names")) names = j["names"].get<std::vector<std::string>>();
  for (const auto& entry : j["environments"]) {
    fs::path p = entry.get<std::string>();
    if (p.is_relative()) p = base / p;
    CsvTable t = read_csv(p);
    if (names.empty() && !t.header.empty()) names = t.header;
    if (!envs.empty() && t.values.cols() != envs.front().cols()) {
      std::ostringstream os;
      os << "dimension mismatch: " << p.string() << " has " << t.values.cols()
         << " columns, first environment has " << envs.front().cols();
      throw DataError(os.str());
    }
    envs.push_back(std::move(t.values));
  }
  if (j.contains("d")) {
    const auto d = j["d"].get<Index>();
    if (d != envs.front().cols()) {
      std::ostringstream os;
      os << "manifest declares d=" << d << " but CSVs have " << envs.front().cols()
         << " columns";
      throw DataError(os.str());
    }
  }
  return MultiEnvDataset(std::move(envs), std::move(names));
}

fs::path save_dataset(const MultiEnvDataset& data, const fs::path& dir,
                      const std::string& manifest_name) {
  fs::create_directories(dir);
  json j;
  j["d"] = data.dim();
  j["environments"] = json::array();
  for (Index k = 0; k < data.num_envs(); ++k) {
    const std::string file = "env" + std::to_string(k) + ".csv";
    write_csv(dir / file, data.env(k), data.names());
    j["environments"].push_back(file);
  }
  if (!data.names().empty()) j["names"] = data.names();
  const fs::path manifest = dir / manifest_name;
  auto os = open_out(manifest);
  os << j.dump(2) << '\n';
  return manifest;
}

MultiEnvDataset standardize(const MultiEnvDataset& data) {
  std::vector<Matrix> out;
  out.reserve(static_cast<size_t>(data.num_envs()));
  for (const auto& m : data.environments()) {
    Matrix s(m.rows(), m.cols());
    for (Index c = 0; c < m.cols(); ++c) {
      const double mean = m.col(c).mean();
      const Vector centered = m.col(c).array() - mean;
      const double sd = std::sqrt(centered.squaredNorm() / static_cast<double>(m.rows()));
      if (sd <= 1e-12 * std::max(1.0, std::abs(mean)))
        s.col(c).setZero();
      else
        s.col(c) = centered / sd;
    }
    out.push_back(std::move(s));
  }
  return MultiEnvDataset(std::move(out), data.names());
}

void write_family(const fs::path& dir, const InterventionalFamily& family) {
  fs::create_directories(dir);
  for (Index k = 0; k < family.num_envs(); ++k)
    write_binary_csv(dir / ("targets_env" + std::to_string(k) + ".csv"),
                     family.targets[static_cast<size_t>(k)]);
}

InterventionalFamily read_family(const fs::path& dir, Index envs) {
  InterventionalFamily f;
  for (Index k = 0; k < envs; ++k) {
    const fs::path p = dir / ("targets_env" + std::to_string(k) + ".csv");
    if (!fs::exists(p)) throw DataError("missing target file " + p.string());
    f.targets.push_back(read_binary_csv(p));
  }
  f.validate();
  return f;
}

}  // namespace igc
