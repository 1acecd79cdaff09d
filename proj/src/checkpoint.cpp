#include "igc/checkpoint.hpp"

#include "igc/dataset_io.hpp"

#include <fstream>

namespace igc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<double> read_trace(const fs::path& path) {
  const Matrix m = read_csv(path).values;
  std::vector<double> out;
  for (Index r = 0; r < m.rows(); ++r) out.push_back(m(r, m.cols() - 1));
  return out;
}

template <typename T>
void assign(const json& j, const char* key, T& field) {
  try {
    field = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

json to_json(const FitConfig& c) {
  return json{{"lambda", c.lambda},
              {"alpha", c.alpha},
              {"lag", c.lag},
              {"hidden", c.hidden},
              {"step_size", c.step_size},
              {"step_growth", c.step_growth},
              {"max_iters", c.max_iters},
              {"warmup_iters", c.warmup_iters},
              {"tol", c.tol},
              {"edge_threshold", c.edge_threshold},
              {"target_threshold", c.target_threshold},
              {"leaky_slope", c.leaky_slope},
              {"init_scale", c.init_scale},
              {"standardize", c.standardize},
              {"seed", c.seed},
              {"threads", c.threads}};
}

FitConfig fit_config_from_json(const json& j, FitConfig c) {
  if (!j.is_object()) throw ConfigError("fit config must be an object");
  for (const auto& [key, value] : j.items()) {
    const char* k = key.c_str();
    if (key == "lambda") assign(j, k, c.lambda);
    else if (key == "alpha") assign(j, k, c.alpha);
    else if (key == "lag") assign(j, k, c.lag);
    else if (key == "hidden") assign(j, k, c.hidden);
    else if (key == "step_size") assign(j, k, c.step_size);
    else if (key == "step_growth") assign(j, k, c.step_growth);
    else if (key == "max_iters") assign(j, k, c.max_iters);
    else if (key == "warmup_iters") assign(j, k, c.warmup_iters);
    else if (key == "tol") assign(j, k, c.tol);
    else if (key == "edge_threshold") assign(j, k, c.edge_threshold);
    else if (key == "target_threshold") assign(j, k, c.target_threshold);
    else if (key == "leaky_slope") assign(j, k, c.leaky_slope);
    else if (key == "init_scale") assign(j, k, c.init_scale);
    else if (key == "standardize") assign(j, k, c.standardize);
    else if (key == "seed") assign(j, k, c.seed);
    else if (key == "threads") assign(j, k, c.threads);
    else throw ConfigError("unknown fit config key '" + key + "'");
  }
  return c;
}

bool Checkpoint::converged() const { return linear ? linear->converged : igc->diagnostics.converged; }

const std::vector<double>& Checkpoint::trace() const {
  return linear ? linear->trace : igc->diagnostics.trace;
}

void write_trace(const fs::path& path, const std::vector<double>& trace) {
  Matrix m(static_cast<Index>(trace.size()), 2);
  for (size_t t = 0; t < trace.size(); ++t) {
    m(static_cast<Index>(t), 0) = static_cast<double>(t);
    m(static_cast<Index>(t), 1) = trace[t];
  }
  write_csv(path, m, {"iteration", "objective"});
}

void save_checkpoint(const fs::path& dir, const LinearParams& p, const FitConfig& cfg) {
  fs::create_directories(dir);
  write_csv(dir / "W0.csv", p.W0);
  for (size_t k = 0; k < p.deltas.size(); ++k)
    write_csv(dir / ("delta_env" + std::to_string(k) + ".csv"), p.deltas[k]);
  write_csv(dir / "intercepts.csv", p.intercepts);
  write_trace(dir / "trace.csv", p.trace);
  write_json(dir / "manifest.json", json{{"format_version", kFormatVersion},
                                         {"model", "linear"},
                                         {"dim", p.dim()},
                                         {"lag", p.lag},
                                         {"envs", p.num_envs()},
                                         {"has_deltas", p.has_deltas},
                                         {"converged", p.converged},
                                         {"iterations", p.iterations},
                                         {"config", to_json(cfg)}});
}

void save_checkpoint(const fs::path& dir, const IgcModeld& model) {
  fs::create_directories(dir);
  const NetLayout& l = model.layout();
  Matrix params(l.dim, l.node_size());
  for (Index i = 0; i < l.dim; ++i) params.row(i) = model.node(i).transpose();
  write_csv(dir / "params.csv", params);
  write_trace(dir / "trace.csv", model.diagnostics.trace);
  write_json(dir / "manifest.json",
             json{{"format_version", kFormatVersion},
                  {"model", "igc"},
                  {"dim", l.dim},
                  {"lag", l.lag},
                  {"hidden", l.hidden},
                  {"envs", l.envs},
                  {"leaky_slope", model.leaky_slope()},
                  {"layout", "one row per node: components 0..envs (W1 column-major, b1, W2, b2), "
                             "then head weights and bias"},
                  {"converged", model.diagnostics.converged},
                  {"iterations", model.diagnostics.iterations},
                  {"config", to_json(model.config)}});
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) throw DataError("no checkpoint manifest at " + manifest.string());
  const json j = read_json(manifest);
  Checkpoint ck;
  try {
    ck.model = j.at("model").get<std::string>();
    ck.config = fit_config_from_json(j.at("config"));
    const Index d = j.at("dim").get<Index>();
    const Index lag = j.at("lag").get<Index>();
    const Index envs = j.at("envs").get<Index>();
    if (ck.model == "linear") {
      LinearParams p;
      p.lag = lag;
      p.W0 = read_csv(dir / "W0.csv").values;
      for (Index k = 0; k < envs; ++k)
        p.deltas.push_back(read_csv(dir / ("delta_env" + std::to_string(k) + ".csv")).values);
      p.intercepts = read_csv(dir / "intercepts.csv").values;
      p.has_deltas = j.at("has_deltas").get<bool>();
      p.converged = j.at("converged").get<bool>();
      p.iterations = j.at("iterations").get<int>();
      p.trace = read_trace(dir / "trace.csv");
      if (p.W0.rows() != d || p.W0.cols() != d * lag || p.intercepts.rows() != d)
        throw DataError("checkpoint matrices do not match the manifest shape");
      for (const auto& D : p.deltas)
        if (D.rows() != d || D.cols() != d * lag)
          throw DataError("checkpoint matrices do not match the manifest shape");
      ck.linear = std::move(p);
    } else if (ck.model == "igc") {
      const NetLayout l{d, lag, j.at("hidden").get<Index>(), envs};
      IgcModeld model(l, j.at("leaky_slope").get<double>());
      const Matrix params = read_csv(dir / "params.csv").values;
      if (params.rows() != d || params.cols() != l.node_size())
        throw DataError("checkpoint parameters do not match the manifest layout");
      for (Index i = 0; i < d; ++i) model.mutable_node(i) = params.row(i).transpose();
      model.config = ck.config;
      model.diagnostics.converged = j.at("converged").get<bool>();
      model.diagnostics.iterations = j.at("iterations").get<int>();
      model.diagnostics.trace = read_trace(dir / "trace.csv");
      ck.igc = std::move(model);
    } else {
      throw DataError("unknown checkpoint model '" + ck.model + "'");
    }
  } catch (const json::exception& e) {
    throw DataError(manifest.string() + ": " + e.what());
  }
  return ck;
}

}  // namespace igc
