#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "hlstm/checkpoint.hpp"
#include "hlstm/commands.hpp"
#include "hlstm/config.hpp"
#include "hlstm/error.hpp"

using namespace hlstm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

ExperimentConfig tiny_mg() {
  ExperimentConfig cfg = mg_preset();
  cfg.n_steps = 600;
  cfg.transient = 200;
  cfg.embed_dim = 4;
  cfg.train.n_layers = 2;
  cfg.train.hidden_dim = 4;
  cfg.train.window_len = 5;
  cfg.train.epochs = 2;
  cfg.eval.v_starts = 3;
  cfg.eval.max_horizon = 20;
  return cfg;
}

ExperimentConfig tiny_ks() {
  ExperimentConfig cfg = ks_preset();
  cfg.n_steps = 150;
  cfg.transient = 50;
  cfg.train.n_layers = 1;
  cfg.train.hidden_dim = 3;
  cfg.train.window_len = 4;
  cfg.train.batch_size = 10;
  cfg.train.epochs = 1;
  return cfg;
}

int run_cli(const std::string& args, const std::string& err_file) {
  const std::string cmd = std::string(HLSTM_CLI_PATH) + " " + args + " >/dev/null 2>" + err_file;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config round-trip") {
  for (const auto& cfg : {mg_preset(), ks_preset(), tiny_mg()}) {
    const std::string text = serialize_config(cfg);
    const ExperimentConfig back = parse_config(text);
    CHECK(back == cfg);
    CHECK(serialize_config(back) == text);
  }
}

TEST_CASE("shipped presets equal the built-in reproduction settings") {
  const fs::path dir = fs::path(HLSTM_SOURCE_DIR) / "presets";
  CHECK(load_config((dir / "mg.yaml").string()) == mg_preset());
  CHECK(load_config((dir / "ks.yaml").string()) == ks_preset());

  const ExperimentConfig mg_desk = load_config((dir / "mg_desk.yaml").string());
  CHECK(mg_desk.train.n_layers == 3);
  CHECK(mg_desk.train.hidden_dim == 24);
  CHECK(mg_desk.n_steps == 4000);
  CHECK(mg_desk.train.epochs == 40);
  CHECK(mg_desk.eval.v_starts == 20);
  CHECK(mg_desk.eval.threshold == 0.1);
  const ExperimentConfig ks_desk = load_config((dir / "ks_desk.yaml").string());
  CHECK(ks_desk.train.n_layers == 3);
  CHECK(ks_desk.train.hidden_dim == 32);
  CHECK(ks_desk.n_steps == 8000);
  CHECK(ks_desk.train.epochs == 40);
  CHECK(ks_desk.eval.v_starts == 20);
  CHECK(ks_desk.eval.threshold == 0.4);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("system: mg\nbogus: 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("system: lorenz\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("system: mg\ntrain:\n  epochs: many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("system: mg\neval:\n  threshold: 1.5\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/cfg.yaml"), IoError);
}

TEST_CASE("generate: layout, determinism and force") {
  TempDir tmp("hlstm_cli_generate");
  const auto mg = cmd_generate(tiny_mg(), tmp / "mg.csv", false);
  CHECK(mg.dim() == 1);
  CHECK(slurp(tmp / "mg.csv").rfind("t,x0\n", 0) == 0);
  cmd_generate(tiny_mg(), tmp / "mg2.csv", false);
  CHECK(slurp(tmp / "mg.csv") == slurp(tmp / "mg2.csv"));
  CHECK_THROWS_AS(cmd_generate(tiny_mg(), tmp / "mg.csv", false), IoError);
  CHECK_NOTHROW(cmd_generate(tiny_mg(), tmp / "mg.csv", true));

  const auto ks = cmd_generate(tiny_ks(), tmp / "ks.csv", false);
  CHECK(ks.dim() == 65);
  CHECK(read_trajectory_csv(tmp / "ks.csv").dim() == 65);
}

TEST_CASE("train, checkpoint and predict") {
  TempDir tmp("hlstm_cli_train");
  const ExperimentConfig cfg = tiny_mg();
  cmd_generate(cfg, tmp / "data.csv", false);

  const auto out = cmd_train(cfg, tmp / "data.csv", tmp / "model.json", false);
  CHECK(out.loss_path == tmp / "model.json.loss.csv");
  std::ifstream loss(out.loss_path);
  std::string line;
  int rows = -1;
  while (std::getline(loss, line)) ++rows;
  CHECK(rows == cfg.train.epochs);

  const Checkpoint ck = read_checkpoint(tmp / "model.json");
  CHECK(ck.epochs_done == 2);
  CHECK(ck.forecaster.params == out.checkpoint.forecaster.params);
  CHECK(ck.adam == out.checkpoint.adam);
  CHECK(serialize_checkpoint(ck) == slurp(tmp / "model.json"));

  // epochs = 0 writes the initialized model.
  ExperimentConfig zero = cfg;
  zero.train.epochs = 0;
  const auto init = cmd_train(zero, tmp / "data.csv", tmp / "init.json", false, "single");
  CHECK(init.checkpoint.epochs_done == 0);
  CHECK_FALSE(init.checkpoint.forecaster.hybrid());
  CHECK_THROWS_AS(cmd_train(cfg, tmp / "data.csv", tmp / "x.json", false, "oracle"), ConfigError);

  // Prediction from raw data rows; the warmup needs context + embedding span rows.
  const Index need = ck.forecaster.context_len() + 3;
  const auto p = cmd_predict(tmp / "model.json", tmp / "data.csv", need + 10, 15, tmp / "pred.csv", false);
  CHECK(p.prediction.frames.rows() == 15);
  const Trajectory written = read_trajectory_csv(tmp / "pred.csv");
  CHECK(written.dim() == 1);
  CHECK(written.rows() == 15);

  const auto empty = cmd_predict(tmp / "model.json", tmp / "data.csv", need, 0, tmp / "empty.csv", false);
  CHECK(empty.prediction.frames.rows() == 0);
  CHECK(slurp(tmp / "empty.csv") == "t,x0\n");

  CHECK_THROWS_AS(cmd_predict(tmp / "model.json", tmp / "data.csv", need - 1, 5, tmp / "p2.csv", false),
                  PreconditionError);
  CHECK_THROWS_AS(cmd_predict(tmp / "model.json", tmp / "missing.csv", need, 5, tmp / "p3.csv", false), IoError);
  try {
    cmd_train(cfg, tmp / "missing.csv", tmp / "m2.json", false);
    FAIL("expected an IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("missing.csv") != std::string::npos);
  }
}

TEST_CASE("evaluate writes aligned per-variant files") {
  TempDir tmp("hlstm_cli_evaluate");
  ExperimentConfig cfg = tiny_mg();
  cmd_generate(cfg, tmp / "data.csv", false);
  const auto r = cmd_evaluate(cfg, tmp / "data.csv", {"single", "multi", "hybrid_single", "hybrid_multi"},
                              tmp / "ev", false);
  CHECK(r.series.size() == 4);
  std::string first_column;
  for (const char* v : {"single", "multi", "hybrid_single", "hybrid_multi"}) {
    const std::string text = slurp(tmp / (std::string("ev/metrics_") + v + ".csv"));
    CHECK(text.rfind("lead_time_MT,rmse,acc,mean_exp\n", 0) == 0);
    std::istringstream is(text);
    std::string line, col;
    while (std::getline(is, line)) col += line.substr(0, line.find(',')) + ";";
    if (first_column.empty()) first_column = col;
    CHECK(col == first_column);
  }
  CHECK_THROWS_AS(cmd_evaluate(cfg, tmp / "data.csv", {"single"}, tmp / "ev", false), IoError);

  cfg.eval.v_starts = 1;
  cmd_evaluate(cfg, tmp / "data.csv", {"oracle"}, tmp / "ev1", false);
  std::ifstream vt(tmp / "ev1/valid_times_oracle.csv");
  std::string line;
  int rows = -1;
  while (std::getline(vt, line)) ++rows;
  CHECK(rows == 1);
  std::ifstream met(tmp / "ev1/metrics_oracle.csv");
  std::getline(met, line);
  while (std::getline(met, line)) {
    std::istringstream ls(line);
    std::string lead, rmse;
    std::getline(ls, lead, ',');
    std::getline(ls, rmse, ',');
    CHECK(rmse == "0");
  }
}

TEST_CASE("command-line front end reports categories and exit codes") {
  TempDir tmp("hlstm_cli_binary");
  const std::string err = tmp / "err.txt";
  CHECK(run_cli("generate --config /nonexistent.yaml --out " + (tmp / "x.csv"), err) == 3);
  CHECK(slurp(err).rfind("error[io]:", 0) == 0);

  {
    std::ofstream bad(tmp / "bad.yaml");
    bad << "system: mg\nunknown_section: {}\n";
  }
  CHECK(run_cli("generate --config " + (tmp / "bad.yaml") + " --out " + (tmp / "x.csv"), err) == 2);
  CHECK(slurp(err).rfind("error[config]:", 0) == 0);

  {
    std::ofstream good(tmp / "cfg.yaml");
    good << serialize_config(tiny_mg());
  }
  CHECK(run_cli("generate --config " + (tmp / "cfg.yaml") + " --out " + (tmp / "d.csv"), err) == 0);
  CHECK(run_cli("generate --config " + (tmp / "cfg.yaml") + " --out " + (tmp / "d.csv"), err) == 3);
  CHECK(run_cli("generate --config " + (tmp / "cfg.yaml") + " --out " + (tmp / "d.csv") + " --force", err) == 0);
  CHECK(run_cli("train --config " + (tmp / "cfg.yaml") + " --data " + (tmp / "d.csv") + " --out " +
                    (tmp / "m.json"),
                err) == 0);
  CHECK(run_cli("predict --checkpoint " + (tmp / "m.json") + " --data " + (tmp / "d.csv") +
                    " --start 2 --steps 5 --out " + (tmp / "p.csv"),
                err) == 4);
  CHECK(slurp(err).rfind("error[precondition]:", 0) == 0);
}
