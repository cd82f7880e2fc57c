#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hlstm/pipeline.hpp"

namespace hlstm {

struct EvalConfig {
  /// Number of prediction start points V.
  int v_starts = 100;
  /// Normalized-error threshold f, 0 < f < 1.
  double threshold = 0.1;
  /// Rollout length per start point, in steps.
  int max_horizon = 1000;
  /// Model time per step.
  double dt = 0.1;
  /// Leading share of the data used for training.
  double train_fraction = 0.8;

  void validate() const;
  bool operator==(const EvalConfig&) const = default;
};

/// ||truth - pred|| / denom.
double normalized_error(const Eigen::Ref<const Vector>& truth, const Eigen::Ref<const Vector>& pred, double denom);

/// <||x||^2>^(1/2) over the rows of the training span.
double error_scale(const Trajectory& train);

struct ValidTime {
  double t = 0.0;
  /// The threshold was never reached; t is the horizon.
  bool censored = false;
};

/// dt times the index of the first error >= f, or dt * size (censored).
ValidTime valid_time(std::span<const double> errors, double threshold, double dt);

/// sqrt(mean_i ||truth_i - pred_i||^2) over the V rows.
double rmse_at(const Eigen::Ref<const RowMatrix>& truths, const Eigen::Ref<const RowMatrix>& preds);

/// Anomaly correlation against the training mean; empty when either anomaly
/// set has zero norm.
std::optional<double> acc_at(const Eigen::Ref<const RowMatrix>& truths, const Eigen::Ref<const RowMatrix>& preds,
                             const Eigen::Ref<const Vector>& xbar);

double median(std::vector<double> values);

struct MetricSeries {
  std::string variant;
  /// Indexed by lead step k (lead time (k + 1) * dt). Infinite/NaN entries
  /// mark lead times at which some rollout had already diverged.
  std::vector<double> rmse;
  std::vector<double> acc;
  std::vector<double> mean_exp;
  std::vector<Index> start_indices;
  std::vector<ValidTime> valid_times;

  double median_valid_time() const;
};

struct VariantSpec {
  std::string name;
  int n_layers = 1;
  bool hybrid = false;
  /// Returns the ground truth; a bound for the metrics.
  bool oracle = false;

  bool operator==(const VariantSpec&) const = default;
};

/// The four compared models: single, multi, hybrid_single, hybrid_multi.
std::vector<VariantSpec> standard_variants(int multi_layers);
/// Parses `single`, `multi`, `hybrid_single`, `hybrid_multi` or `oracle`.
VariantSpec parse_variant(const std::string& name, int multi_layers);

/// Everything shared by the variants; n_layers and hybrid come from each variant.
struct ComparisonSetup {
  TrainConfig train;
  ModelSpec model;
};

struct ComparisonResult {
  Index train_rows = 0;
  std::vector<Index> start_indices;
  double error_scale = 0.0;
  Vector train_mean;
  std::vector<MetricSeries> series;
  std::vector<std::vector<EpochStats>> loss_histories;
};

/// Trains every variant on the leading train_fraction of `data` with the same
/// seed, rolls each out from the same V start points drawn from the test span,
/// and aggregates errors per lead time.
ComparisonResult run_comparison(const Trajectory& data, std::span<const VariantSpec> variants,
                                const ComparisonSetup& setup, const EvalConfig& ec, std::uint64_t seed);

/// Metrics of given rollouts against `data` from the given start rows.
MetricSeries score_rollouts(const std::string& name, const Trajectory& data, std::span<const Index> starts,
                            std::span<const Prediction> predictions, double scale, const Eigen::Ref<const Vector>& xbar,
                            const EvalConfig& ec);

}  // namespace hlstm
