#pragma once

#include <cstdint>
#include <string>

#include "hlstm/dynamics.hpp"
#include "hlstm/eval.hpp"
#include "hlstm/pipeline.hpp"

namespace hlstm {

enum class SystemKind { mackey_glass, kuramoto_sivashinsky };

std::string to_string(SystemKind kind);

/// One experiment: which system, how to generate it, how to train and how to
/// evaluate. Stored as a YAML file with one table per section.
struct ExperimentConfig {
  SystemKind system = SystemKind::mackey_glass;
  std::uint64_t seed = 1;

  Index n_steps = 10000;
  Index transient = 1000;

  MgParams mg;
  MgInitialHistory mg_init;
  int embed_dim = 8;
  int embed_lag = 1;

  KsParams ks;
  KsInitialCondition ks_init;

  /// Model trained by the `train` command.
  bool hybrid = true;
  bool residual_label = true;

  TrainConfig train;
  EvalConfig eval;

  /// Sampling step of the selected system.
  double dt() const;
  void validate() const;

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

/// Settings from the MG table of the reproduction (N=5, d=21, d_h=40, ...).
ExperimentConfig mg_preset();
/// Settings from the KS table of the reproduction (L=35, D=65, d=20, d_h=50, ...).
ExperimentConfig ks_preset();

/// Raw generated data -> the frames the network sees (delay embedding for MG).
Trajectory to_model_space(const ExperimentConfig& cfg, const Trajectory& raw);

/// Generated raw trajectory for the configured system.
Trajectory generate_trajectory(const ExperimentConfig& cfg);

/// Model spec (empirical model, label kind, embedding) for the configured
/// system; `hybrid` overrides the config flag.
ModelSpec model_spec(const ExperimentConfig& cfg, bool hybrid);

}  // namespace hlstm
