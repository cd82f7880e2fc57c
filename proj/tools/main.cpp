// Command-line front end: generate, train, predict, evaluate.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "hlstm/commands.hpp"
#include "hlstm/error.hpp"

namespace {

int exit_code(const std::string& category) {
  if (category == "config") return 2;
  if (category == "io") return 3;
  if (category == "precondition") return 4;
  if (category == "blowup") return 5;
  if (category == "divergence") return 6;
  return 1;
}

hlstm::ExperimentConfig config_from(const std::string& path, const std::optional<std::uint64_t>& seed) {
  hlstm::ExperimentConfig cfg = hlstm::load_config(path);
  if (seed) {
    cfg.seed = *seed;
    cfg.train.seed = *seed;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid stacked-LSTM forecaster for chaotic systems"};
  app.require_subcommand(1);

  std::string config_path;
  std::string data_path;
  std::string out_path;
  std::string checkpoint_path;
  std::string variant;
  std::string variants = "single,multi,hybrid_single,hybrid_multi";
  std::optional<std::uint64_t> seed;
  bool force = false;
  long start_index = 0;
  long n_steps = 0;

  auto* gen = app.add_subcommand("generate", "Integrate the configured system and write a trajectory CSV");
  gen->add_option("--config", config_path, "Experiment config (YAML)")->required();
  gen->add_option("--out", out_path, "Output CSV")->required();
  gen->add_option("--seed", seed, "Override the config seed");
  gen->add_flag("--force", force, "Overwrite existing output");

  auto* tr = app.add_subcommand("train", "Train a forecaster on the leading share of a trajectory");
  tr->add_option("--config", config_path, "Experiment config (YAML)")->required();
  tr->add_option("--data", data_path, "Trajectory CSV")->required();
  tr->add_option("--out", out_path, "Checkpoint path; the loss curve goes to <out>.loss.csv")->required();
  tr->add_option("--variant", variant, "single | multi | hybrid_single | hybrid_multi (default: from config)");
  tr->add_option("--seed", seed, "Override the config seed");
  tr->add_flag("--force", force, "Overwrite existing output");

  auto* pr = app.add_subcommand("predict", "Closed-loop rollout from a checkpoint");
  pr->add_option("--checkpoint", checkpoint_path, "Checkpoint from `train`")->required();
  pr->add_option("--data", data_path, "Trajectory CSV providing the warmup history")->required();
  pr->add_option("--start", start_index, "Row of the data file at which prediction starts")->required();
  pr->add_option("--steps", n_steps, "Number of steps to predict")->required();
  pr->add_option("--out", out_path, "Output CSV")->required();
  pr->add_flag("--force", force, "Overwrite existing output");

  auto* ev = app.add_subcommand("evaluate", "Train and compare model variants over V start points");
  ev->add_option("--config", config_path, "Experiment config (YAML)")->required();
  ev->add_option("--data", data_path, "Trajectory CSV")->required();
  ev->add_option("--variants", variants, "Comma-separated variant list (single,multi,hybrid_single,hybrid_multi,oracle)");
  ev->add_option("--out", out_path, "Output directory")->required();
  ev->add_option("--seed", seed, "Override the config seed");
  ev->add_flag("--force", force, "Overwrite existing output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const auto traj = hlstm::cmd_generate(config_from(config_path, seed), out_path, force);
      std::cout << fmt::format("wrote {} rows x {} columns to {}\n", traj.rows(), traj.dim(), out_path);
    } else if (tr->parsed()) {
      const auto out = hlstm::cmd_train(config_from(config_path, seed), data_path, out_path, force, variant);
      std::cout << fmt::format("trained {} epochs; checkpoint {}; loss curve {}\n", out.checkpoint.epochs_done,
                               out_path, out.loss_path);
    } else if (pr->parsed()) {
      const auto out = hlstm::cmd_predict(checkpoint_path, data_path, start_index, n_steps, out_path, force);
      const auto rows = out.prediction.frames.rows();
      if (out.prediction.diverged) {
        std::cout << fmt::format("status=diverged rows={} requested={}\n", rows, n_steps);
      } else {
        std::cout << fmt::format("status=ok rows={}\n", rows);
      }
    } else if (ev->parsed()) {
      std::vector<std::string> names;
      std::stringstream ss(variants);
      for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) names.push_back(item);
      }
      const auto cfg = config_from(config_path, seed);
      const auto result = hlstm::cmd_evaluate(cfg, data_path, names, out_path, force);
      for (const auto& m : result.series) {
        std::cout << fmt::format("{:<14} median t_v = {:.2f} MT\n", m.variant, m.median_valid_time());
      }
    }
  } catch (const hlstm::Error& e) {
    std::cerr << fmt::format("error[{}]: {}\n", e.category(), e.what());
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << fmt::format("error[internal]: {}\n", e.what());
    return 1;
  }
  return 0;
}
