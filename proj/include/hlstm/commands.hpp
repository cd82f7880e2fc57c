#pragma once

#include <string>
#include <vector>

#include "hlstm/checkpoint.hpp"
#include "hlstm/config.hpp"
#include "hlstm/eval.hpp"

namespace hlstm {

/// Writes the raw trajectory CSV for the configured system.
Trajectory cmd_generate(const ExperimentConfig& cfg, const std::string& out_path, bool force);

struct TrainOutcome {
  Checkpoint checkpoint;
  std::string loss_path;
};

/// Trains on the leading train_fraction of the data file and writes the
/// checkpoint plus `<out>.loss.csv` (`epoch,mean_loss,eta`). `variant`
/// selects the model (empty: config n_layers with config hybrid flag).
TrainOutcome cmd_train(const ExperimentConfig& cfg, const std::string& data_path, const std::string& out_checkpoint,
                       bool force, const std::string& variant = {});

struct PredictOutcome {
  Prediction prediction;
  /// Row index (in the data file) of the first predicted value.
  Index first_row = 0;
};

/// Closed-loop rollout starting at row `start_index` of the data file, using
/// the rows before it as warmup. Delay-embedded models write only the leading
/// coordinate so the output lines up with the raw data file.
PredictOutcome cmd_predict(const std::string& checkpoint_path, const std::string& data_path, Index start_index,
                           Index n_steps, const std::string& out_path, bool force);

/// Runs the variant comparison and writes metrics_<variant>.csv,
/// valid_times_<variant>.csv and summary.csv into out_dir.
ComparisonResult cmd_evaluate(const ExperimentConfig& cfg, const std::string& data_path,
                              const std::vector<std::string>& variants, const std::string& out_dir, bool force);

void write_loss_csv(const std::string& path, const std::vector<EpochStats>& history);
void write_metrics_csv(const std::string& path, const MetricSeries& m, double dt);
void write_valid_times_csv(const std::string& path, const MetricSeries& m);

}  // namespace hlstm
