#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "hlstm/dynamics.hpp"
#include "hlstm/net.hpp"
#include "hlstm/optim.hpp"

namespace hlstm {

/// Per-dimension z-score statistics (population standard deviation).
struct NormStats {
  Vector mean;
  Vector std;

  static NormStats identity(Index dim);

  Vector normalize(const Eigen::Ref<const Vector>& x) const;
  Vector denormalize(const Eigen::Ref<const Vector>& z) const;
  RowMatrix normalize_rows(const Eigen::Ref<const RowMatrix>& rows) const;
  RowMatrix denormalize_rows(const Eigen::Ref<const RowMatrix>& rows) const;
  Index dim() const { return mean.size(); }

  bool operator==(const NormStats& other) const;
};

/// Channels whose std falls below this are treated as unit-scale.
inline constexpr double kMinStd = 1e-12;

NormStats fit_norm(const Trajectory& train);
/// Statistics of the row increments x_{t+1} - x_t.
NormStats fit_increment_norm(const Trajectory& train);

/// Mackey-Glass empirical model on delay-embedded frames: reads the frame
/// delay_steps() rows back, so it needs that much lookback.
struct MgEmpirical {
  MgParams params;
  bool operator==(const MgEmpirical&) const = default;
};

/// Kuramoto-Sivashinsky empirical model: one mismatched integration step.
struct KsEmpirical {
  KsParams params;
  bool operator==(const KsEmpirical&) const = default;
};

using EmpiricalModel = std::variant<MgEmpirical, KsEmpirical>;

/// Rows of history needed before a frame to evaluate E on it.
int empirical_lookback(const EmpiricalModel& model);

/// E of frames.row(row), in physical units.
Vector evaluate_empirical(const EmpiricalModel& model, const Eigen::Ref<const RowMatrix>& frames, Index row);

/// What kind of forecaster to build, independent of its size.
struct ModelSpec {
  bool hybrid = false;
  bool residual_label = false;
  /// Frames are lag-1 delay embeddings: only the leading coordinate is
  /// predicted and the rest are shifted in from the previous frame.
  bool delay_embedded = false;
  /// Required when hybrid.
  std::optional<EmpiricalModel> empirical;
};

/// A trained (or hand-built) network together with everything needed to run
/// it on physical-unit data.
struct HybridForecaster {
  LstmStackParams params;
  NormStats state_norm;
  /// Scales labels, network outputs and the empirical channel.
  NormStats target_norm;
  std::optional<EmpiricalModel> empirical;
  bool delay_embedded = false;

  const NetConfig& config() const { return params.config(); }
  bool hybrid() const { return config().hybrid; }
  int lookback() const { return empirical ? empirical_lookback(*empirical) : 0; }
  /// Physical frames a rollout needs: window_len plus the empirical lookback.
  int context_len() const { return config().window_len + lookback(); }
  void validate() const;
};

/// Network-facing frame for frames.row(row): [norm(x), norm(E(x))] for
/// hybrid forecasters, norm(x) otherwise.
Vector splice_frame(const HybridForecaster& f, const Eigen::Ref<const RowMatrix>& frames, Index row);

/// Training samples over one trajectory. Frames are stored once; sample i
/// covers rows starts[i] .. starts[i] + window_len - 1 and its label is the
/// following row (or the increment into it).
struct SampleSet {
  RowMatrix frames;
  RowMatrix labels;
  std::vector<Index> starts;
  int window_len = 0;

  Index count() const { return static_cast<Index>(starts.size()); }
  /// window_len x frame_dim, oldest row first.
  RowMatrix window(Index i) const;
  PackedWindows pack(std::span<const Index> samples) const;
  Matrix pack_labels(std::span<const Index> samples) const;
};

/// Windows whose every frame has the empirical lookback available: with N
/// rows there are N - window_len - lookback samples.
SampleSet make_windows(const Trajectory& train, const HybridForecaster& f);

enum class OptimizerKind { adam, sgd };

struct TrainConfig {
  int batch_size = 20;
  int window_len = 21;
  int hidden_dim = 40;
  int n_layers = 5;
  int epochs = 150;
  double eta = 1e-3;
  double gamma_decay = 0.95;
  double lambda = 5e-6;
  std::uint64_t seed = 1;
  double clip_norm = 5.0;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_stab = 1e-8;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  /// Learning rate used during the epoch.
  double eta = 0.0;
};

struct TrainResult {
  HybridForecaster forecaster;
  std::vector<EpochStats> history;
  AdamState adam;
  LrSchedule schedule;
  int epochs_done = 0;
};

/// Net shape implied by a training config, a model spec and the data width.
NetConfig make_net_config(const TrainConfig& tc, const ModelSpec& spec, Index state_dim);

/// Xavier-initialized forecaster with normalization fitted to `train`.
HybridForecaster build_forecaster(const Trajectory& train, const TrainConfig& tc, const ModelSpec& spec);

/// Mini-batch training on `train` (the whole argument is the training span).
/// Per batch: mean squared error plus lambda * sum ||W||^2, clipped gradient,
/// one optimizer step; the learning rate decays once per epoch. Passing
/// `resume` continues from a previous result for the remaining epochs.
TrainResult train(const Trajectory& train, const TrainConfig& tc, const ModelSpec& spec,
                  const TrainResult* resume = nullptr);

struct Prediction {
  /// Predicted frames in physical units; shorter than requested on divergence.
  Trajectory frames;
  bool diverged = false;
};

/// Autoregressive rollout from the last context_len() rows of `history`.
Prediction predict_closed_loop(const HybridForecaster& f, const Eigen::Ref<const RowMatrix>& history,
                               Index n_steps);

/// Same rollout for several histories at once; each entry is independent.
std::vector<Prediction> predict_closed_loop_batch(const HybridForecaster& f, std::span<const RowMatrix> histories,
                                                  Index n_steps);

}  // namespace hlstm
