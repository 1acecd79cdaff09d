#include "igc/dataset_io.hpp"
#include "igc/harness.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace igc;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Every regular file under `a` exists under `b` with the same bytes, and
// vice versa.
bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> fa, fb;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) fa.push_back(fs::relative(e.path(), a));
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) fb.push_back(fs::relative(e.path(), b));
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb || fa.empty()) return false;
  for (const auto& rel : fa)
    if (slurp(a / rel) != slurp(b / rel)) return false;
  return true;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p);
  os << s;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

SyntheticData small_linear(std::uint64_t seed) {
  LinearGenConfig g;
  g.n_nodes = 4;
  g.T = 300;
  g.n_envs = 3;
  g.seed = seed;
  return gen_linear(g);
}

FitConfig quick_igc() {
  FitConfig c;
  c.lambda = 0.1;
  c.hidden = 4;
  c.max_iters = 60;
  c.warmup_iters = 10;
  return c;
}

}  // namespace

TEST_CASE("seed derivation is a pure function of master, name and index") {
  CHECK(derive_seed(1, "a", 0) == derive_seed(1, "a", 0));
  CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
  CHECK(derive_seed(1, "a", 0) != derive_seed(1, "b", 0));
  CHECK(derive_seed(1, "a", 0) != derive_seed(2, "a", 0));
}

TEST_CASE("fit config JSON: round trip, overlay and unknown keys") {
  FitConfig c;
  c.lambda = 0.37;
  c.alpha = 0.25;
  c.lag = 3;
  c.standardize = false;
  const FitConfig back = fit_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  const FitConfig over = fit_config_from_json(nlohmann::json{{"lambda", 2.0}}, c);
  CHECK(over.lambda == 2.0);
  CHECK(over.lag == 3);
  CHECK_THROWS_AS(fit_config_from_json(nlohmann::json{{"lamda", 2.0}}), ConfigError);
  CHECK_THROWS_AS(fit_config_from_json(nlohmann::json{{"lambda", "big"}}), ConfigError);
}

TEST_CASE("checkpoints round-trip byte for byte") {
  const fs::path dir = oracle::temp_dir("ck");
  const auto sd = small_linear(1);

  SUBCASE("linear") {
    FitConfig cfg;
    cfg.lambda = 0.2;
    cfg.max_iters = 200;
    const Checkpoint ck = fit_model(sd.data, "linear", cfg);
    save_checkpoint(dir / "a", *ck.linear, cfg);
    const Checkpoint back = load_checkpoint(dir / "a");
    REQUIRE(back.linear);
    CHECK(back.model == "linear");
    CHECK((back.linear->W0.array() == ck.linear->W0.array()).all());
    CHECK(back.trace() == ck.trace());
    save_checkpoint(dir / "b", *back.linear, back.config);
    CHECK(same_tree(dir / "a", dir / "b"));
    CHECK(predict(back).graph.adjacency == predict(ck).graph.adjacency);
  }
  SUBCASE("igc") {
    const Checkpoint ck = fit_model(sd.data, "igc", quick_igc());
    save_checkpoint(dir / "a", *ck.igc);
    const Checkpoint back = load_checkpoint(dir / "a");
    REQUIRE(back.igc);
    CHECK(back.model == "igc");
    CHECK(back.trace() == ck.trace());
    save_checkpoint(dir / "b", *back.igc);
    CHECK(same_tree(dir / "a", dir / "b"));
    const Prediction p1 = predict(ck), p2 = predict(back);
    CHECK(p1.graph.adjacency == p2.graph.adjacency);
    CHECK((p1.graph.scores->array() == p2.graph.scores->array()).all());
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "missing"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("CLI: usage errors exit with the config code") {
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"frobnicate"}).code == kExitConfig);
  CHECK(cli({"--help"}).code == kExitOk);
  const CliResult bad = cli({"generate", "--family", "quadratic", "--out", "/tmp/never"});
  CHECK(bad.code == kExitConfig);
  const std::string all = bad.out + bad.err;
  for (const char* f : {"linear", "nonlinear", "lorenz"}) CHECK(all.find(f) != std::string::npos);
  CHECK(cli({"generate", "--family", "linear"}).code == kExitConfig);  // no --out
  CHECK(cli({"fit", "--out", "/tmp/never"}).code == kExitConfig);     // no --manifest
}

TEST_CASE("CLI: generate, fit, evaluate and recover on a small linear dataset") {
  const fs::path dir = oracle::temp_dir("cli");
  const std::string data = (dir / "data").string();
  REQUIRE(cli({"generate", "--family", "linear", "--d", "4", "--envs", "3", "--T", "300", "--seed", "5",
               "--out", data})
              .code == kExitOk);
  for (const char* f : {"env0.csv", "env2.csv", "manifest.json", "truth.csv", "targets_env0.csv",
                        "targets_env2.csv", "run_summary.json"})
    CHECK(fs::exists(dir / "data" / f));
  const MultiEnvDataset loaded = load_dataset(dir / "data" / "manifest.json");
  CHECK(loaded.num_envs() == 3);
  CHECK(loaded.dim() == 4);
  CHECK(loaded.env(0).rows() == 300);
  // The same seed regenerates the same bytes.
  REQUIRE(cli({"generate", "--family", "linear", "--d", "4", "--envs", "3", "--T", "300", "--seed", "5",
               "--out", (dir / "data2").string()})
              .code == kExitOk);
  CHECK(slurp(dir / "data" / "env1.csv") == slurp(dir / "data2" / "env1.csv"));

  const std::string manifest = (dir / "data" / "manifest.json").string();
  const CliResult fit = cli({"fit", "--manifest", manifest, "--model", "linear", "--lambda", "0.3",
                             "--max-iters", "2000", "--out", (dir / "fit").string()});
  REQUIRE(fit.code == kExitOk);
  const nlohmann::json summary = read_json(dir / "fit" / "run_summary.json");
  CHECK(summary["results"]["all_groups_zero"] == false);
  const CsvTable trace = read_csv(dir / "fit" / "trace.csv");
  const auto tr = trace.values.col(trace.values.cols() - 1);
  REQUIRE(tr.size() > 1);
  for (Index t = 1; t < tr.size(); ++t) CHECK(tr(t) <= tr(t - 1) + 1e-12 * std::abs(tr(t - 1)));

  const CliResult ev = cli({"evaluate", "--checkpoint", (dir / "fit").string(), "--out",
                            (dir / "eval").string()});
  REQUIRE(ev.code == kExitOk);
  const std::string agg = slurp(dir / "eval" / "aggregate.csv");
  for (const char* col : {"f1_mean", "f1_std", "auroc_mean", "shd_std"}) CHECK(agg.find(col) != std::string::npos);
  const nlohmann::json rep = read_json(dir / "eval" / "report_0.json");
  CHECK(rep.contains("targets"));

  const CliResult rec = cli({"recover", "--checkpoint", (dir / "fit").string(), "--out",
                             (dir / "rec").string()});
  CHECK(rec.code == kExitOk);
  CHECK(fs::exists(dir / "rec" / "targets_env2.csv"));
  CHECK(fs::exists(dir / "rec" / "summary.json"));

  SUBCASE("huge penalty: every group is zero and the summary says so") {
    REQUIRE(cli({"fit", "--manifest", manifest, "--model", "linear", "--lambda", "1000", "--out",
                 (dir / "zero").string()})
                .code == kExitOk);
    CHECK(read_json(dir / "zero" / "run_summary.json")["results"]["all_groups_zero"] == true);
  }
  SUBCASE("missing truth names its path") {
    const CliResult r = cli({"evaluate", "--checkpoint", (dir / "fit").string(), "--truth",
                             (dir / "nowhere.csv").string(), "--out", (dir / "eval2").string()});
    CHECK(r.code == kExitData);
    CHECK(r.err.find("nowhere.csv") != std::string::npos);
  }
  SUBCASE("recover on a single-environment linear fit is refused") {
    write_text(dir / "one.json", R"({"environments": [")" + (dir / "data" / "env0.csv").string() + R"("]})");
    REQUIRE(cli({"fit", "--manifest", (dir / "one.json").string(), "--model", "linear", "--out",
                 (dir / "single").string()})
                .code == kExitOk);
    const CliResult r = cli({"recover", "--checkpoint", (dir / "single").string(), "--out",
                             (dir / "rec2").string()});
    CHECK(r.code == kExitData);
    CHECK(r.err.find("deltas") != std::string::npos);
  }
  SUBCASE("iteration limit gives the not-converged code and still writes the checkpoint") {
    const CliResult r = cli({"fit", "--manifest", manifest, "--model", "linear", "--lambda", "0.3",
                             "--tol", "0", "--max-iters", "3", "--out", (dir / "short").string()});
    CHECK(r.code == kExitNotConverged);
    CHECK(fs::exists(dir / "short" / "checkpoint" / "manifest.json"));
  }
  fs::remove_all(dir);
}

TEST_CASE("CLI: benchmark writes one row per experiment; an empty list is an error") {
  const fs::path dir = oracle::temp_dir("bench");
  write_text(dir / "empty.json", R"({"experiments": []})");
  const CliResult e = cli({"benchmark", "--config", (dir / "empty.json").string(), "--out",
                           (dir / "o0").string()});
  CHECK(e.code == kExitConfig);
  CHECK(e.err.find("no experiments") != std::string::npos);

  write_text(dir / "one.json", R"({"seeds": 2, "experiments": [
    {"name": "tiny", "family": "linear", "params": {"d": 3, "T": 300, "envs": 2},
     "model": "linear", "fit": {"lambda": 0.3, "max_iters": 500}}]})");
  const CliResult r = cli({"benchmark", "--config", (dir / "one.json").string(), "--out",
                           (dir / "o1").string(), "--jobs", "2"});
  CHECK(r.code == kExitOk);
  const std::string table = slurp(dir / "o1" / "results.csv");
  CHECK(std::count(table.begin(), table.end(), '\n') == 2);  // header plus one row
  CHECK(table.find("tiny") != std::string::npos);
  CHECK(fs::exists(dir / "o1" / "cells" / "tiny" / "seed1"));
  write_text(dir / "dup.json", R"({"experiments": [{"name": "a"}, {"name": "a"}]})");
  CHECK(cli({"benchmark", "--config", (dir / "dup.json").string(), "--out", (dir / "o2").string()}).code ==
        kExitConfig);
  fs::remove_all(dir);
}

TEST_CASE("benchmark config: seed counts from signed or unsigned JSON integers") {
  const nlohmann::json exp = nlohmann::json::array({{{"name", "x"}}});
  CHECK(benchmark_config_from_json({{"seeds", 2}, {"experiments", exp}}).seed_indices ==
        std::vector<std::uint64_t>{0, 1});
  CHECK(benchmark_config_from_json({{"seeds", 2u}, {"experiments", exp}}).seed_indices.size() == 2);
  CHECK(benchmark_config_from_json({{"seeds", {4, 7}}, {"experiments", exp}}).seed_indices ==
        std::vector<std::uint64_t>{4, 7});
  CHECK_THROWS_AS(benchmark_config_from_json({{"seeds", -1}, {"experiments", exp}}), ConfigError);
  CHECK_THROWS_AS(benchmark_config_from_json({{"seeds", 0}, {"experiments", exp}}), ConfigError);
  CHECK_THROWS_AS(benchmark_config_from_json({{"experiments", exp}, {"sedes", 2}}), ConfigError);
}
