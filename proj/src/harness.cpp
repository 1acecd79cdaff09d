#include "igc/harness.hpp"

#include "igc/dataset_io.hpp"
#include "igc/parallel.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace igc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Reads keys from a JSON object and rejects any key nobody asked for.
class KeyReader {
 public:
  KeyReader(const json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) throw ConfigError(context_ + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& field) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      field = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(context_ + ": key '" + key + "' has the wrong type");
    }
  }

  template <typename T>
  void get(const char* key, std::optional<T>& field) {
    if (!j_.contains(key)) {
      seen_.insert(key);
      return;
    }
    T value;
    get(key, value);
    field = std::move(value);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError(context_ + ": unknown key '" + key + "'");
  }

 private:
  const json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

void read_linear_keys(KeyReader& r, LinearGenConfig& c) {
  r.get("d", c.n_nodes);
  r.get("edge_prob", c.edge_prob);
  r.get("envs", c.n_envs);
  r.get("T", c.T);
  r.get("weight_low", c.weight_low);
  r.get("weight_high", c.weight_high);
  r.get("interv_low", c.interv_low);
  r.get("interv_high", c.interv_high);
  r.get("interv_time", c.interv_time);
  r.get("noise_scale", c.noise_scale);
  r.get("self_loops", c.self_loops);
  std::optional<std::vector<Index>> ks;
  r.get("intervened_envs", ks);
  if (ks) c.intervened_envs = ks;
  r.get("targets_per_env", c.targets_per_env);
  r.get("distinct_targets", c.distinct_targets);
  r.get("burn_in", c.burn_in);
  r.get("max_spectral_radius", c.max_spectral_radius);
  r.get("max_retries", c.max_retries);
}

json linear_gen_to_json(const LinearGenConfig& c) {
  json j{{"d", c.n_nodes},
         {"edge_prob", c.edge_prob},
         {"envs", c.n_envs},
         {"T", c.T},
         {"weight_low", c.weight_low},
         {"weight_high", c.weight_high},
         {"interv_low", c.interv_low},
         {"interv_high", c.interv_high},
         {"interv_time", c.interv_time},
         {"noise_scale", c.noise_scale},
         {"self_loops", c.self_loops},
         {"intervened_envs", c.intervened()},
         {"targets_per_env", c.targets_per_env},
         {"distinct_targets", c.distinct_targets},
         {"burn_in", c.burn_in},
         {"max_spectral_radius", c.max_spectral_radius},
         {"max_retries", c.max_retries},
         {"seed", c.seed}};
  return j;
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
}

void write_json_file(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json_file(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json versions() {
  std::ostringstream compiler;
#if defined(__clang__)
  compiler << "clang " << __clang_major__ << "." << __clang_minor__;
#elif defined(__GNUC__)
  compiler << "gcc " << __GNUC__ << "." << __GNUC_MINOR__ << "." << __GNUC_PATCHLEVEL__;
#else
  compiler << "unknown";
#endif
  return json{{"igc", kVersion},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                            std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                    std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
              {"compiler", compiler.str()}};
}

// Machine-readable record of one CLI invocation.
struct RunSummary {
  std::string command;
  std::vector<std::string> args;
  json config = json::object();
  json results = json::object();
  std::uint64_t seed = 0;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const fs::path& dir) const {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json_file(dir / "run_summary.json", json{{"command", command},
                                                   {"args", args},
                                                   {"config", config},
                                                   {"seed", seed},
                                                   {"results", results},
                                                   {"versions", versions()},
                                                   {"wall_time_seconds", wall}});
  }
};

void write_curve(const fs::path& path, const EvalReport& r) {
  Matrix m(static_cast<Index>(r.curve.size()), 4);
  for (size_t i = 0; i < r.curve.size(); ++i) {
    const auto& c = r.curve[i];
    m.row(static_cast<Index>(i)) << c.threshold, c.tpr, c.fpr, c.precision;
  }
  write_csv(path, m, {"threshold", "tpr", "fpr", "precision"});
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"accuracy", "auroc",     "auprc", "f1",
                                              "recall",   "precision", "shd"};
  return names;
}

std::optional<double> metric(const EvalReport& r, const std::string& name) {
  if (name == "accuracy") return r.accuracy;
  if (name == "auroc") return r.auroc;
  if (name == "auprc") return r.auprc;
  if (name == "f1") return r.f1;
  if (name == "recall") return r.recall;
  if (name == "precision") return r.precision;
  if (name == "shd") return static_cast<double>(r.shd);
  return std::nullopt;
}

// Header plus one "mean,std" pair per metric over the given reports.
std::string aggregate_columns(const std::vector<const EvalReport*>& reports) {
  std::string row;
  for (const auto& name : metric_names()) {
    std::vector<double> vals;
    for (const auto* r : reports)
      if (auto v = metric(*r, name)) vals.push_back(*v);
    if (vals.empty()) {
      row += ",,";
    } else {
      const MeanStd ms = mean_std(vals);
      row += "," + format_metric(ms.mean) + "," + format_metric(ms.std);
    }
  }
  return row;
}

std::string aggregate_header() {
  std::string h;
  for (const auto& name : metric_names()) h += "," + name + "_mean," + name + "_std";
  return h;
}

std::string dataset_label(const DatasetSpec& s) {
  std::string label = s.family;
  for (const char* key : {"d", "m", "envs", "T"})
    if (s.params.contains(key)) label += std::string(" ") + key + "=" + s.params[key].dump();
  if (s.family == "manifest") label += " " + s.manifest.filename().string();
  return label;
}

bool safe_name(const std::string& s) {
  if (s.empty()) return false;
  for (unsigned char c : s)
    if (!(std::isalnum(c) || c == '_' || c == '-' || c == '.')) return false;
  return s != "." && s != "..";
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, const std::string& name, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(master) ^ fnv1a(name)) ^ splitmix64(index + 1));
}

const std::vector<std::string>& dataset_families() {
  static const std::vector<std::string> f{"linear", "nonlinear", "lorenz", "manifest"};
  return f;
}

LinearGenConfig linear_gen_from_json(const json& j) {
  LinearGenConfig c;
  KeyReader r(j, "linear generator");
  read_linear_keys(r, c);
  r.finish();
  return c;
}

NonlinearGenConfig nonlinear_gen_from_json(const json& j) {
  NonlinearGenConfig c;
  KeyReader r(j, "nonlinear generator");
  read_linear_keys(r, c);
  r.get("leaky_slope", c.leaky_slope);
  r.get("gen_hidden", c.gen_hidden);
  r.get("divergence_bound", c.divergence_bound);
  r.finish();
  return c;
}

LorenzConfig lorenz_gen_from_json(const json& j) {
  LorenzConfig c;
  KeyReader r(j, "lorenz generator");
  r.get("m", c.m);
  r.get("T", c.T);
  r.get("F_base", c.F_base);
  r.get("F_interv", c.F_interv);
  r.get("switch_time", c.switch_time);
  r.get("dt", c.dt);
  r.get("subsample", c.subsample);
  r.get("burn_in", c.burn_in);
  r.get("noise_scale", c.noise_scale);
  r.get("init_scale", c.init_scale);
  r.get("blowup_bound", c.blowup_bound);
  r.finish();
  return c;
}

SyntheticData make_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.family == "linear") {
    LinearGenConfig c = linear_gen_from_json(spec.params);
    c.seed = seed;
    return gen_linear(c);
  }
  if (spec.family == "nonlinear") {
    NonlinearGenConfig c = nonlinear_gen_from_json(spec.params);
    c.seed = seed;
    return gen_nonlinear(c);
  }
  if (spec.family == "lorenz") {
    LorenzConfig c = lorenz_gen_from_json(spec.params);
    c.seed = seed;
    return gen_lorenz(c);
  }
  if (spec.family == "manifest") {
    if (spec.manifest.empty()) throw ConfigError("manifest dataset needs a manifest path");
    if (spec.truth.empty()) throw ConfigError("manifest dataset needs a truth matrix path");
    if (!fs::exists(spec.truth)) throw DataError("truth file not found: " + spec.truth.string());
    SyntheticData out;
    out.data = load_dataset(spec.manifest);
    out.truth = GrangerGraph{read_binary_csv(spec.truth), std::nullopt, 0.0};
    out.truth.validate();
    if (out.truth.dim() != out.data.dim())
      throw DataError("truth matrix " + spec.truth.string() + " does not match the dataset dimension");
    out.targets = InterventionalFamily::zeros(out.data.num_envs(), out.data.dim());
    return out;
  }
  throw ConfigError("unknown dataset family '" + spec.family +
                    "' (valid: linear, nonlinear, lorenz, manifest)");
}

fs::path write_synthetic(const SyntheticData& data, const fs::path& dir) {
  const fs::path manifest = save_dataset(data.data, dir);
  write_binary_csv(dir / "truth.csv", data.truth.adjacency);
  write_family(dir, data.targets);
  return manifest;
}

Checkpoint fit_model(const MultiEnvDataset& data, const std::string& model, const FitConfig& cfg) {
  Checkpoint ck;
  ck.model = model;
  ck.config = cfg;
  if (model == "linear") {
    ck.linear = fit_linear(data, cfg);
  } else if (model == "igc") {
    ck.igc = fit_igc(data, cfg);
  } else {
    throw ConfigError("unknown model '" + model + "' (valid: linear, igc)");
  }
  return ck;
}

Prediction predict(const Checkpoint& ck) {
  if (ck.linear) {
    auto [graph, family] = extract_linear_graph(*ck.linear, ck.config);
    Prediction p{std::move(graph), std::nullopt};
    if (ck.linear->has_deltas) p.targets = std::move(family);
    return p;
  }
  return Prediction{extract_graph(*ck.igc, ck.config), recover_targets(*ck.igc, ck.config)};
}

BenchmarkConfig benchmark_config_from_json(const json& j, const fs::path& base) {
  BenchmarkConfig cfg;
  if (!j.is_object()) throw ConfigError("benchmark config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "master_seed") {
      cfg.master_seed = value.get<std::uint64_t>();
    } else if (key == "seeds") {
      cfg.seed_indices.clear();
      if (value.is_number_integer() && value.get<std::int64_t>() >= 0) {
        for (std::uint64_t s = 0; s < value.get<std::uint64_t>(); ++s) cfg.seed_indices.push_back(s);
      } else if (value.is_array()) {
        cfg.seed_indices = value.get<std::vector<std::uint64_t>>();
      } else {
        throw ConfigError("'seeds' must be a count or a list of seed indices");
      }
      if (cfg.seed_indices.empty()) throw ConfigError("the seed list is empty");
    } else if (key == "include_diagonal") {
      cfg.include_diagonal = value.get<bool>();
    } else if (key == "experiments") {
      if (!value.is_array()) throw ConfigError("'experiments' must be a list");
      for (const auto& e : value) {
        Experiment ex;
        KeyReader r(e, "experiment");
        std::string manifest, truth;
        r.get("name", ex.name);
        r.get("family", ex.dataset.family);
        r.get("params", ex.dataset.params);
        r.get("manifest", manifest);
        r.get("truth", truth);
        r.get("model", ex.model);
        json fit = json::object();
        r.get("fit", fit);
        r.finish();
        if (!safe_name(ex.name))
          throw ConfigError("experiment names must be non-empty and use [A-Za-z0-9_.-]");
        const auto& fams = dataset_families();
        if (std::find(fams.begin(), fams.end(), ex.dataset.family) == fams.end())
          throw ConfigError("experiment '" + ex.name + "': unknown family '" + ex.dataset.family +
                            "' (valid: linear, nonlinear, lorenz, manifest)");
        if (ex.model != "linear" && ex.model != "igc")
          throw ConfigError("experiment '" + ex.name + "': unknown model '" + ex.model + "'");
        auto resolve = [&](const std::string& p) {
          fs::path path = p;
          return (p.empty() || path.is_absolute()) ? path : base / path;
        };
        ex.dataset.manifest = resolve(manifest);
        ex.dataset.truth = resolve(truth);
        ex.fit = fit_config_from_json(fit);
        ex.fit.validate();
        cfg.experiments.push_back(std::move(ex));
      }
    } else {
      throw ConfigError("unknown benchmark config key '" + key + "'");
    }
  }
  if (cfg.experiments.empty()) throw ConfigError("benchmark config lists no experiments");
  std::set<std::string> names;
  for (const auto& e : cfg.experiments)
    if (!names.insert(e.name).second) throw ConfigError("duplicate experiment name '" + e.name + "'");
  return cfg;
}

std::vector<CellResult> run_benchmark(const BenchmarkConfig& cfg, const fs::path& out, int jobs) {
  std::vector<CellResult> cells;
  for (const auto& e : cfg.experiments)
    for (auto idx : cfg.seed_indices) {
      CellResult c;
      c.experiment = e.name;
      c.seed_index = idx;
      c.seed = derive_seed(cfg.master_seed, e.name, idx);
      cells.push_back(std::move(c));
    }
  std::map<std::string, const Experiment*> by_name;
  for (const auto& e : cfg.experiments) by_name[e.name] = &e;

  parallel_for(static_cast<long>(cells.size()), jobs, [&](long ci) {
    CellResult& c = cells[static_cast<size_t>(ci)];
    const Experiment& e = *by_name.at(c.experiment);
    const fs::path dir = out / "cells" / e.name / ("seed" + std::to_string(c.seed_index));
    try {
      const SyntheticData data = make_dataset(e.dataset, c.seed);
      write_synthetic(data, dir / "data");
      FitConfig fit = e.fit;
      fit.seed = splitmix64(c.seed);
      fit.threads = 1;
      const Checkpoint ck = fit_model(data.data, e.model, fit);
      if (ck.linear) save_checkpoint(dir / "checkpoint", *ck.linear, fit);
      else save_checkpoint(dir / "checkpoint", *ck.igc);
      const Prediction pred = predict(ck);
      c.report = score_graph(pred.graph, data.truth, cfg.include_diagonal);
      c.converged = ck.converged();
      json rep = to_json(c.report);
      if (pred.targets && pred.targets->num_envs() == data.targets.num_envs())
        rep["targets"] = to_json(score_targets(*pred.targets, data.targets));
      write_json_file(dir / "report.json", rep);
      c.ok = true;
    } catch (const std::exception& ex) {
      c.ok = false;
      c.error = ex.what();
    }
  });
  return cells;
}

std::string benchmark_table(const BenchmarkConfig& cfg, const std::vector<CellResult>& cells) {
  std::ostringstream os;
  os << "experiment,dataset,model,cells,ok,failed,not_converged,status" << aggregate_header()
     << ",errors\n";
  for (const auto& e : cfg.experiments) {
    std::vector<const EvalReport*> reports;
    long total = 0, failed = 0, not_conv = 0;
    std::string errors;
    for (const auto& c : cells) {
      if (c.experiment != e.name) continue;
      ++total;
      if (c.ok) {
        reports.push_back(&c.report);
        not_conv += !c.converged;
      } else {
        ++failed;
        errors += (errors.empty() ? "" : "; ") + ("seed" + std::to_string(c.seed_index) + ": " + c.error);
      }
    }
    const char* status = failed == 0 ? "ok" : (failed == total ? "failed" : "partial");
    os << e.name << "," << csv_quote(dataset_label(e.dataset)) << "," << e.model << "," << total
       << "," << total - failed << "," << failed << "," << not_conv << "," << status
       << aggregate_columns(reports) << "," << csv_quote(errors) << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Command line

namespace {

struct Flags {
  std::string out;
  std::string config;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

fs::path resolve_checkpoint_dir(const fs::path& p) {
  if (fs::exists(p / "checkpoint" / "manifest.json")) return p / "checkpoint";
  return p;
}

// Truth matrix next to the dataset the checkpoint was fitted on.
fs::path default_truth(const fs::path& checkpoint_arg) {
  for (const fs::path& summary :
       {checkpoint_arg / "run_summary.json", checkpoint_arg.parent_path() / "run_summary.json"}) {
    if (!fs::exists(summary)) continue;
    const json j = read_json_file(summary);
    if (j.contains("config") && j["config"].contains("manifest"))
      return fs::path(j["config"]["manifest"].get<std::string>()).parent_path() / "truth.csv";
  }
  throw DataError("no truth given and none recorded for checkpoint " + checkpoint_arg.string() +
                  "; pass --truth");
}

int cmd_generate(const std::vector<std::string>& args, std::ostream& out, const std::string& family_flag,
                 const Flags& f, const std::map<std::string, long>& shape) {
  RunSummary summary;
  summary.command = "generate";
  summary.args = args;
  DatasetSpec spec;
  std::uint64_t seed = 0;
  if (!f.config.empty()) {
    const json j = read_json_file(f.config);
    KeyReader r(j, "generate config");
    r.get("family", spec.family);
    r.get("params", spec.params);
    r.get("seed", seed);
    r.finish();
  }
  if (!family_flag.empty()) spec.family = family_flag;
  if (spec.family == "manifest") throw ConfigError("generate needs a synthetic family (linear, nonlinear, lorenz)");
  for (const auto& [key, value] : shape) spec.params[key] = value;
  if (f.seed) seed = *f.seed;
  if (f.out.empty()) throw ConfigError("--out is required");

  const SyntheticData data = make_dataset(spec, seed);
  const fs::path dir = f.out;
  const fs::path manifest = write_synthetic(data, dir);
  json resolved;
  if (spec.family == "linear") {
    LinearGenConfig c = linear_gen_from_json(spec.params);
    c.seed = seed;
    resolved = linear_gen_to_json(c);
  } else if (spec.family == "nonlinear") {
    NonlinearGenConfig c = nonlinear_gen_from_json(spec.params);
    c.seed = seed;
    resolved = linear_gen_to_json(c);
    resolved["leaky_slope"] = c.leaky_slope;
    resolved["gen_hidden"] = c.gen_hidden;
    resolved["divergence_bound"] = c.divergence_bound;
  } else {
    const LorenzConfig c = lorenz_gen_from_json(spec.params);
    resolved = json{{"m", c.m},           {"T", c.T},
                    {"F_base", c.F_base}, {"F_interv", c.F_interv},
                    {"switch_time", c.switch_time},
                    {"dt", c.dt},         {"subsample", c.subsample},
                    {"burn_in", c.burn_in},
                    {"noise_scale", c.noise_scale},
                    {"init_scale", c.init_scale},
                    {"seed", seed}};
  }
  summary.seed = seed;
  summary.config = json{{"family", spec.family}, {"params", resolved}, {"seed", seed}};
  summary.results = json{{"manifest", manifest.string()},
                         {"d", data.data.dim()},
                         {"envs", data.data.num_envs()},
                         {"true_edges", data.truth.num_edges()}};
  summary.write(dir);
  out << "wrote " << data.data.num_envs() << " environment(s), d=" << data.data.dim() << " to "
      << dir.string() << "\n";
  return kExitOk;
}

int cmd_fit(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const std::string& manifest_flag, const std::string& model_flag, const Flags& f,
            const json& fit_overrides) {
  RunSummary summary;
  summary.command = "fit";
  summary.args = args;
  std::string model = "igc";
  std::string manifest;
  FitConfig cfg;
  if (!f.config.empty()) {
    const json j = read_json_file(f.config);
    KeyReader r(j, "fit config file");
    json fit = json::object();
    r.get("model", model);
    r.get("manifest", manifest);
    r.get("fit", fit);
    r.finish();
    cfg = fit_config_from_json(fit, cfg);
  }
  if (!model_flag.empty()) model = model_flag;
  if (!manifest_flag.empty()) manifest = manifest_flag;
  cfg = fit_config_from_json(fit_overrides, cfg);
  if (f.seed) cfg.seed = *f.seed;
  cfg.threads = f.jobs;
  if (manifest.empty()) throw ConfigError("--manifest is required");
  if (f.out.empty()) throw ConfigError("--out is required");
  cfg.validate();

  const MultiEnvDataset data = load_dataset(manifest);
  const Checkpoint ck = fit_model(data, model, cfg);
  const fs::path dir = f.out;
  if (ck.linear) save_checkpoint(dir / "checkpoint", *ck.linear, cfg);
  else save_checkpoint(dir / "checkpoint", *ck.igc);
  write_trace(dir / "trace.csv", ck.trace());
  const Prediction pred = predict(ck);
  write_binary_csv(dir / "graph.csv", pred.graph.adjacency);
  write_csv(dir / "scores.csv", *pred.graph.scores);

  const bool all_zero = (pred.graph.scores->array() == 0.0).all() &&
                        (!pred.targets || std::all_of(pred.targets->scores.begin(),
                                                      pred.targets->scores.end(), [](const Matrix& s) {
                                                        return (s.array() == 0.0).all();
                                                      }));
  summary.seed = cfg.seed;
  json echo = to_json(cfg);
  echo["threads"] = cfg.threads;
  summary.config = json{{"model", model}, {"manifest", fs::absolute(manifest).string()}, {"fit", echo}};
  summary.results = json{{"converged", ck.converged()},
                         {"iterations", ck.linear ? ck.linear->iterations : ck.igc->diagnostics.iterations},
                         {"final_objective", ck.trace().empty() ? 0.0 : ck.trace().back()},
                         {"edges", pred.graph.num_edges()},
                         {"all_groups_zero", all_zero}};
  summary.write(dir);
  out << "fitted " << model << " on " << data.num_envs() << " environment(s); " << pred.graph.num_edges()
      << " edge(s) above threshold " << cfg.edge_threshold << "\n";
  if (!ck.converged()) {
    err << "warning: fit did not converge within " << cfg.max_iters
        << " iterations; the checkpoint holds the last iterate\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

int cmd_evaluate(const std::vector<std::string>& args, std::ostream& out,
                 const std::vector<std::string>& checkpoints, const std::vector<std::string>& truths,
                 bool exclude_diagonal, std::optional<double> edge_threshold, const Flags& f) {
  RunSummary summary;
  summary.command = "evaluate";
  summary.args = args;
  if (checkpoints.empty()) throw ConfigError("--checkpoint is required");
  if (!truths.empty() && truths.size() != 1 && truths.size() != checkpoints.size())
    throw ConfigError("give one --truth, or one per --checkpoint");
  if (f.out.empty()) throw ConfigError("--out is required");
  const fs::path dir = f.out;

  std::vector<EvalReport> reports;
  json per_run = json::array();
  for (size_t i = 0; i < checkpoints.size(); ++i) {
    const fs::path arg = checkpoints[i];
    Checkpoint ck = load_checkpoint(resolve_checkpoint_dir(arg));
    if (edge_threshold) ck.config.edge_threshold = *edge_threshold;
    const fs::path truth_path = truths.empty() ? default_truth(arg)
                                               : fs::path(truths.size() == 1 ? truths[0] : truths[i]);
    if (!fs::exists(truth_path)) throw DataError("truth file not found: " + truth_path.string());
    const GrangerGraph truth{read_binary_csv(truth_path), std::nullopt, 0.0};
    const Prediction pred = predict(ck);
    EvalReport r = score_graph(pred.graph, truth, !exclude_diagonal);
    json rep = to_json(r);
    rep["checkpoint"] = arg.string();
    rep["truth"] = truth_path.string();
    const fs::path targets0 = truth_path.parent_path() / "targets_env0.csv";
    if (pred.targets && fs::exists(targets0)) {
      const InterventionalFamily tf = read_family(truth_path.parent_path(), pred.targets->num_envs());
      rep["targets"] = to_json(score_targets(*pred.targets, tf));
    }
    write_json_file(dir / ("report_" + std::to_string(i) + ".json"), rep);
    write_curve(dir / ("curve_" + std::to_string(i) + ".csv"), r);
    per_run.push_back(rep);
    reports.push_back(std::move(r));
  }
  std::vector<const EvalReport*> ptrs;
  for (const auto& r : reports) ptrs.push_back(&r);
  const std::string table = "runs" + aggregate_header() + "\n" + std::to_string(reports.size()) +
                            aggregate_columns(ptrs) + "\n";
  write_text(dir / "aggregate.csv", table);
  summary.config = json{{"checkpoints", checkpoints},
                        {"truths", truths},
                        {"include_diagonal", !exclude_diagonal}};
  if (edge_threshold) summary.config["edge_threshold"] = *edge_threshold;
  summary.results = json{{"reports", per_run}};
  summary.write(dir);
  out << table;
  return kExitOk;
}

int cmd_recover(const std::vector<std::string>& args, std::ostream& out, const std::string& checkpoint,
                std::optional<double> target_threshold, const Flags& f) {
  RunSummary summary;
  summary.command = "recover";
  summary.args = args;
  if (checkpoint.empty()) throw ConfigError("--checkpoint is required");
  if (f.out.empty()) throw ConfigError("--out is required");
  Checkpoint ck = load_checkpoint(resolve_checkpoint_dir(checkpoint));
  if (ck.linear && !ck.linear->has_deltas)
    throw DataError("checkpoint " + checkpoint +
                    " is a linear fit without per-environment deltas; target recovery needs "
                    "a multi-environment fit");
  if (target_threshold) ck.config.target_threshold = *target_threshold;
  const InterventionalFamily fam = *predict(ck).targets;
  const fs::path dir = f.out;
  write_family(dir, fam);
  json envs = json::array();
  for (Index k = 0; k < fam.num_envs(); ++k) {
    write_csv(dir / ("target_scores_env" + std::to_string(k) + ".csv"), fam.scores[static_cast<size_t>(k)]);
    envs.push_back(json{{"env", k},
                        {"intervened", fam.intervened(k)},
                        {"targets", fam.targets[static_cast<size_t>(k)].sum()},
                        {"max_score", fam.scores[static_cast<size_t>(k)].maxCoeff()}});
    out << "env " << k << ": " << (fam.intervened(k) ? "intervened" : "non-intervened") << " ("
        << fam.targets[static_cast<size_t>(k)].sum() << " target edge(s))\n";
  }
  write_json_file(dir / "summary.json", json{{"target_threshold", ck.config.target_threshold},
                                             {"environments", envs}});
  summary.config = json{{"checkpoint", checkpoint}, {"target_threshold", ck.config.target_threshold}};
  summary.results = json{{"environments", envs}};
  summary.write(dir);
  return kExitOk;
}

int cmd_benchmark(const std::vector<std::string>& args, std::ostream& out, const Flags& f) {
  RunSummary summary;
  summary.command = "benchmark";
  summary.args = args;
  if (f.config.empty()) throw ConfigError("--config is required");
  if (f.out.empty()) throw ConfigError("--out is required");
  const json j = read_json_file(f.config);
  BenchmarkConfig cfg = benchmark_config_from_json(j, fs::path(f.config).parent_path());
  if (f.seed) cfg.master_seed = *f.seed;
  const fs::path dir = f.out;
  fs::create_directories(dir);
  const auto cells = run_benchmark(cfg, dir, f.jobs);

  const std::string table = benchmark_table(cfg, cells);
  write_text(dir / "results.csv", table);
  std::ostringstream cell_csv;
  cell_csv << "experiment,seed_index,seed,ok,converged" << [] {
    std::string h;
    for (const auto& n : metric_names()) h += "," + n;
    return h;
  }() << ",error\n";
  long failed = 0;
  for (const auto& c : cells) {
    cell_csv << c.experiment << "," << c.seed_index << "," << c.seed << "," << c.ok << "," << c.converged;
    for (const auto& n : metric_names()) {
      const auto v = c.ok ? metric(c.report, n) : std::nullopt;
      cell_csv << "," << (v ? format_metric(*v) : "");
    }
    cell_csv << "," << csv_quote(c.error) << "\n";
    failed += !c.ok;
  }
  write_text(dir / "cells.csv", cell_csv.str());
  summary.seed = cfg.master_seed;
  summary.config = j;
  summary.config["master_seed"] = cfg.master_seed;
  summary.results = json{{"cells", cells.size()}, {"failed", failed}};
  summary.write(dir);
  out << table;
  return failed ? kExitFailure : kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interventional Granger causal discovery on multi-environment time series", "igc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Flags flags;
  std::string family, manifest, model;
  std::optional<long> d, envs, T, m;
  std::vector<std::string> checkpoints, truths;
  std::string checkpoint;
  bool exclude_diagonal = false;
  std::optional<double> edge_threshold, target_threshold;
  std::optional<double> lambda, alpha, step_size, step_growth, tol;
  std::optional<long> lag, hidden;
  std::optional<int> max_iters, warmup_iters;
  std::optional<bool> standardize;

  auto add_common = [&](CLI::App* sub, bool config) {
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_option("--seed", flags.seed, "Seed");
    if (config) sub->add_option("--config", flags.config, "JSON config file")->check(CLI::ExistingFile);
  };

  const std::vector<std::string> synthetic{"linear", "nonlinear", "lorenz"};
  auto* gen = app.add_subcommand("generate", "Generate a synthetic multi-environment dataset");
  add_common(gen, true);
  gen->add_option("--family", family, "Dataset family")->check(CLI::IsMember(synthetic));
  gen->add_option("--d", d, "Number of series (linear, nonlinear)");
  gen->add_option("--envs", envs, "Number of environments (linear, nonlinear)");
  gen->add_option("--T", T, "Observations per environment");
  gen->add_option("--m", m, "Number of Lorenz-96 variables");

  auto* fit = app.add_subcommand("fit", "Fit a model to a dataset manifest");
  add_common(fit, true);
  fit->add_option("--manifest", manifest, "Dataset manifest (JSON)");
  fit->add_option("--model", model, "Model")->check(CLI::IsMember({"linear", "igc"}));
  fit->add_option("--jobs", flags.jobs, "Worker threads over nodes")->check(CLI::PositiveNumber);
  fit->add_option("--lambda", lambda, "Penalty strength");
  fit->add_option("--alpha", alpha, "Penalty mixing weight");
  fit->add_option("--lag", lag, "Time lag");
  fit->add_option("--hidden", hidden, "Hidden units per layer");
  fit->add_option("--max-iters", max_iters, "Iteration limit");
  fit->add_option("--warmup-iters", warmup_iters, "Unpenalized warm-up iterations (igc)");
  fit->add_option("--step-size", step_size, "Initial step size");
  fit->add_option("--step-growth", step_growth, "Step multiplier after each accepted iteration");
  fit->add_option("--tol", tol, "Relative objective tolerance");
  fit->add_option("--edge-threshold", edge_threshold, "Edge binarization threshold");
  fit->add_option("--target-threshold", target_threshold, "Target binarization threshold");
  fit->add_option("--standardize", standardize, "Standardize each environment (true/false)");

  auto* eval = app.add_subcommand("evaluate", "Score fitted checkpoints against truth");
  eval->add_option("--out", flags.out, "Output directory");
  eval->add_option("--checkpoint", checkpoints, "Fit output or checkpoint directory (repeatable)");
  eval->add_option("--truth", truths, "Truth adjacency CSV (one, or one per checkpoint)");
  eval->add_flag("--exclude-diagonal", exclude_diagonal, "Score off-diagonal entries only");
  eval->add_option("--edge-threshold", edge_threshold, "Override the edge threshold");

  auto* rec = app.add_subcommand("recover", "Recover interventional targets from a checkpoint");
  rec->add_option("--out", flags.out, "Output directory");
  rec->add_option("--checkpoint", checkpoint, "Fit output or checkpoint directory");
  rec->add_option("--target-threshold", target_threshold, "Override the target threshold");

  auto* bench = app.add_subcommand("benchmark", "Run generate, fit and evaluate over an experiment grid");
  add_common(bench, true);
  bench->add_option("--jobs", flags.jobs, "Parallel cells")->check(CLI::PositiveNumber);

  std::vector<std::string> argv_store{"igc"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) {
      std::map<std::string, long> shape;
      if (d) shape["d"] = *d;
      if (envs) shape["envs"] = *envs;
      if (T) shape["T"] = *T;
      if (m) shape["m"] = *m;
      return cmd_generate(args, out, family, flags, shape);
    }
    if (fit->parsed()) {
      json o = json::object();
      if (lambda) o["lambda"] = *lambda;
      if (alpha) o["alpha"] = *alpha;
      if (lag) o["lag"] = *lag;
      if (hidden) o["hidden"] = *hidden;
      if (max_iters) o["max_iters"] = *max_iters;
      if (warmup_iters) o["warmup_iters"] = *warmup_iters;
      if (step_size) o["step_size"] = *step_size;
      if (step_growth) o["step_growth"] = *step_growth;
      if (tol) o["tol"] = *tol;
      if (edge_threshold) o["edge_threshold"] = *edge_threshold;
      if (target_threshold) o["target_threshold"] = *target_threshold;
      if (standardize) o["standardize"] = *standardize;
      return cmd_fit(args, out, err, manifest, model, flags, o);
    }
    if (eval->parsed())
      return cmd_evaluate(args, out, checkpoints, truths, exclude_diagonal, edge_threshold, flags);
    if (rec->parsed()) return cmd_recover(args, out, checkpoint, target_threshold, flags);
    return cmd_benchmark(args, out, flags);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace igc
