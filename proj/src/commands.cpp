#include "hlstm/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <fmt/format.h>

#include "hlstm/error.hpp"

namespace hlstm {

namespace fs = std::filesystem;

namespace {

void refuse_overwrite(const std::string& path, bool force) {
  if (!force && fs::exists(path)) {
    throw IoError(fmt::format("'{}' already exists; pass --force to overwrite", path));
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(fmt::format("cannot open '{}' for writing", path));
  return os;
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", v);
}

Trajectory load_training_span(const ExperimentConfig& cfg, const std::string& data_path) {
  const Trajectory model = to_model_space(cfg, read_trajectory_csv(data_path));
  const auto rows = static_cast<Index>(std::floor(cfg.eval.train_fraction * static_cast<double>(model.rows())));
  return Trajectory{model.states.topRows(rows), model.dt};
}

}  // namespace

void write_loss_csv(const std::string& path, const std::vector<EpochStats>& history) {
  auto os = open_out(path);
  os << "epoch,mean_loss,eta\n";
  for (const auto& e : history) os << fmt::format("{},{},{}\n", e.epoch, csv_number(e.mean_loss), csv_number(e.eta));
}

void write_metrics_csv(const std::string& path, const MetricSeries& m, double dt) {
  auto os = open_out(path);
  os << "lead_time_MT,rmse,acc,mean_exp\n";
  for (std::size_t k = 0; k < m.rmse.size(); ++k) {
    os << fmt::format("{},{},{},{}\n", csv_number(static_cast<double>(k + 1) * dt), csv_number(m.rmse[k]),
                      csv_number(m.acc[k]), csv_number(m.mean_exp[k]));
  }
}

void write_valid_times_csv(const std::string& path, const MetricSeries& m) {
  auto os = open_out(path);
  os << "start_index,t_v_MT,censored\n";
  for (std::size_t i = 0; i < m.valid_times.size(); ++i) {
    os << fmt::format("{},{},{}\n", m.start_indices[i], csv_number(m.valid_times[i].t),
                      m.valid_times[i].censored ? 1 : 0);
  }
}

Trajectory cmd_generate(const ExperimentConfig& cfg, const std::string& out_path, bool force) {
  refuse_overwrite(out_path, force);
  Trajectory traj = generate_trajectory(cfg);
  write_trajectory_csv(out_path, traj);
  return traj;
}

TrainOutcome cmd_train(const ExperimentConfig& cfg, const std::string& data_path, const std::string& out_checkpoint,
                       bool force, const std::string& variant) {
  cfg.validate();
  TrainOutcome out;
  out.loss_path = out_checkpoint + ".loss.csv";
  refuse_overwrite(out_checkpoint, force);
  refuse_overwrite(out.loss_path, force);

  TrainConfig tc = cfg.train;
  bool hybrid = cfg.hybrid;
  if (!variant.empty()) {
    const VariantSpec v = parse_variant(variant, cfg.train.n_layers);
    if (v.oracle) throw ConfigError("the oracle variant cannot be trained");
    tc.n_layers = v.n_layers;
    hybrid = v.hybrid;
  }
  const Trajectory train_span = load_training_span(cfg, data_path);
  const TrainResult result = train(train_span, tc, model_spec(cfg, hybrid));

  Checkpoint& ckpt = out.checkpoint;
  ckpt.forecaster = result.forecaster;
  ckpt.adam = result.adam;
  ckpt.schedule = result.schedule;
  ckpt.epochs_done = result.epochs_done;
  ckpt.system = to_string(cfg.system);
  ckpt.embed_dim = cfg.system == SystemKind::mackey_glass ? cfg.embed_dim : 1;
  ckpt.embed_lag = cfg.system == SystemKind::mackey_glass ? cfg.embed_lag : 1;
  ckpt.dt = cfg.dt();
  write_checkpoint(out_checkpoint, ckpt);
  write_loss_csv(out.loss_path, result.history);
  return out;
}

PredictOutcome cmd_predict(const std::string& checkpoint_path, const std::string& data_path, Index start_index,
                           Index n_steps, const std::string& out_path, bool force) {
  refuse_overwrite(out_path, force);
  if (n_steps < 0) throw PreconditionError("steps must be >= 0");
  const Checkpoint ckpt = read_checkpoint(checkpoint_path);
  const HybridForecaster& f = ckpt.forecaster;

  Trajectory raw = read_trajectory_csv(data_path);
  raw.dt = ckpt.dt;
  const bool embedded = ckpt.system == "mg";
  const Trajectory model = embedded ? mg_embed(raw, ckpt.embed_dim, ckpt.embed_lag) : raw;
  const Index span = embedded ? static_cast<Index>(ckpt.embed_dim - 1) * ckpt.embed_lag : 0;
  const Index model_row = start_index - span;
  const Index ctx = f.context_len();
  if (model_row < ctx || start_index > raw.rows()) {
    throw PreconditionError(fmt::format("start index {} needs {} rows of history (valid range {}..{})", start_index,
                                        ctx + span, ctx + span, raw.rows()));
  }

  PredictOutcome out;
  out.first_row = start_index;
  out.prediction = predict_closed_loop(f, model.states.middleRows(model_row - ctx, ctx), n_steps);
  out.prediction.frames.dt = ckpt.dt;

  Trajectory written = out.prediction.frames;
  if (f.delay_embedded) written.states = RowMatrix(out.prediction.frames.states.leftCols(1));
  write_trajectory_csv(out_path, written, start_index);
  return out;
}

ComparisonResult cmd_evaluate(const ExperimentConfig& cfg, const std::string& data_path,
                              const std::vector<std::string>& variants, const std::string& out_dir, bool force) {
  cfg.validate();
  if (variants.empty()) throw ConfigError("no variants given");
  std::vector<VariantSpec> specs;
  for (const auto& name : variants) specs.push_back(parse_variant(name, cfg.train.n_layers));

  const fs::path dir(out_dir);
  std::vector<std::string> targets{(dir / "summary.csv").string()};
  for (const auto& v : specs) {
    targets.push_back((dir / fmt::format("metrics_{}.csv", v.name)).string());
    targets.push_back((dir / fmt::format("valid_times_{}.csv", v.name)).string());
  }
  for (const auto& t : targets) refuse_overwrite(t, force);

  const Trajectory model = to_model_space(cfg, read_trajectory_csv(data_path));
  ComparisonSetup setup{cfg.train, model_spec(cfg, true)};
  ComparisonResult result = run_comparison(model, specs, setup, cfg.eval, cfg.seed);

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", out_dir, ec.message()));
  auto summary = open_out(targets.front());
  summary << "variant,median_t_v_MT,censored\n";
  for (const auto& m : result.series) {
    write_metrics_csv((dir / fmt::format("metrics_{}.csv", m.variant)).string(), m, cfg.dt());
    write_valid_times_csv((dir / fmt::format("valid_times_{}.csv", m.variant)).string(), m);
    int censored = 0;
    for (const auto& v : m.valid_times) censored += v.censored ? 1 : 0;
    summary << fmt::format("{},{},{}\n", m.variant, csv_number(m.median_valid_time()), censored);
  }
  return result;
}

}  // namespace hlstm
