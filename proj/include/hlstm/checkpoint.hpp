#pragma once

#include <string>

#include "hlstm/pipeline.hpp"

namespace hlstm {

inline constexpr const char* kCheckpointFormat = "hlstm-checkpoint/1";

/// A trained forecaster plus the optimizer state needed to resume training
/// and the data layout needed to feed it raw files. See
/// docs/checkpoint_format.md for the on-disk layout.
struct Checkpoint {
  HybridForecaster forecaster;
  AdamState adam;
  LrSchedule schedule;
  int epochs_done = 0;

  /// "mg" or "ks".
  std::string system;
  /// Delay embedding applied to raw MG files (1 for KS).
  int embed_dim = 1;
  int embed_lag = 1;
  double dt = 0.0;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text);

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace hlstm
