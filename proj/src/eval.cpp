#include "hlstm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "hlstm/error.hpp"

namespace hlstm {

void EvalConfig::validate() const {
  if (v_starts < 1) throw ConfigError("v_starts must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError(fmt::format("threshold f must lie in (0, 1), got {}", threshold));
  }
  if (max_horizon < 1) throw ConfigError("max_horizon must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
}

double normalized_error(const Eigen::Ref<const Vector>& truth, const Eigen::Ref<const Vector>& pred, double denom) {
  if (!(denom > 0.0)) throw ConfigError("normalized error needs a positive denominator");
  return (truth - pred).norm() / denom;
}

double error_scale(const Trajectory& train) {
  if (train.rows() < 1) throw PreconditionError("error scale needs a non-empty training span");
  const double scale = std::sqrt(train.states.rowwise().squaredNorm().mean());
  if (!(scale > 0.0)) throw ConfigError("training span has zero mean-square norm");
  return scale;
}

ValidTime valid_time(std::span<const double> errors, double threshold, double dt) {
  for (std::size_t k = 0; k < errors.size(); ++k) {
    // Non-finite errors count as crossed.
    if (!(errors[k] < threshold)) return {dt * static_cast<double>(k), false};
  }
  return {dt * static_cast<double>(errors.size()), true};
}

double rmse_at(const Eigen::Ref<const RowMatrix>& truths, const Eigen::Ref<const RowMatrix>& preds) {
  if (truths.rows() == 0) throw PreconditionError("rmse needs at least one start point");
  if (truths.rows() != preds.rows() || truths.cols() != preds.cols()) {
    throw PreconditionError("rmse: truth/prediction shape mismatch");
  }
  return std::sqrt((truths - preds).rowwise().squaredNorm().mean());
}

std::optional<double> acc_at(const Eigen::Ref<const RowMatrix>& truths, const Eigen::Ref<const RowMatrix>& preds,
                             const Eigen::Ref<const Vector>& xbar) {
  if (truths.rows() != preds.rows() || truths.cols() != preds.cols() || xbar.size() != truths.cols()) {
    throw PreconditionError("acc: shape mismatch");
  }
  const RowMatrix ta = truths.rowwise() - xbar.transpose();
  const RowMatrix pa = preds.rowwise() - xbar.transpose();
  const double tn = ta.norm();
  const double pn = pa.norm();
  if (!(tn > 0.0) || !(pn > 0.0) || !std::isfinite(tn) || !std::isfinite(pn)) return std::nullopt;
  return std::clamp(ta.cwiseProduct(pa).sum() / (tn * pn), -1.0, 1.0);
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double MetricSeries::median_valid_time() const {
  std::vector<double> t;
  t.reserve(valid_times.size());
  for (const auto& v : valid_times) t.push_back(v.t);
  return median(std::move(t));
}

std::vector<VariantSpec> standard_variants(int multi_layers) {
  return {parse_variant("single", multi_layers), parse_variant("multi", multi_layers),
          parse_variant("hybrid_single", multi_layers), parse_variant("hybrid_multi", multi_layers)};
}

VariantSpec parse_variant(const std::string& name, int multi_layers) {
  if (name == "single") return {name, 1, false, false};
  if (name == "multi") return {name, multi_layers, false, false};
  if (name == "hybrid_single") return {name, 1, true, false};
  if (name == "hybrid_multi") return {name, multi_layers, true, false};
  if (name == "oracle") return {name, 0, false, true};
  throw ConfigError(fmt::format("unknown variant '{}' (expected single, multi, hybrid_single, hybrid_multi, oracle)",
                                name));
}

MetricSeries score_rollouts(const std::string& name, const Trajectory& data, std::span<const Index> starts,
                            std::span<const Prediction> predictions, double scale, const Eigen::Ref<const Vector>& xbar,
                            const EvalConfig& ec) {
  const Index V = static_cast<Index>(starts.size());
  const Index H = ec.max_horizon;
  const Index dim = data.dim();
  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();

  MetricSeries m;
  m.variant = name;
  m.start_indices.assign(starts.begin(), starts.end());
  m.rmse.assign(static_cast<std::size_t>(H), 0.0);
  m.acc.assign(static_cast<std::size_t>(H), 0.0);
  m.mean_exp.assign(static_cast<std::size_t>(H), 0.0);

  std::vector<std::vector<double>> errors(static_cast<std::size_t>(V), std::vector<double>(static_cast<std::size_t>(H), inf));
  RowMatrix truths(V, dim);
  RowMatrix preds(V, dim);
  for (Index k = 0; k < H; ++k) {
    bool complete = true;
    double exp_sum = 0.0;
    for (Index i = 0; i < V; ++i) {
      const Index row = starts[static_cast<std::size_t>(i)] + k;
      const RowMatrix& p = predictions[static_cast<std::size_t>(i)].frames.states;
      truths.row(i) = data.states.row(row);
      if (k < p.rows()) {
        preds.row(i) = p.row(k);
        const double e = normalized_error(truths.row(i).transpose(), preds.row(i).transpose(), scale);
        errors[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = e;
        exp_sum += e;
      } else {
        complete = false;
      }
    }
    const auto kk = static_cast<std::size_t>(k);
    if (complete) {
      m.rmse[kk] = rmse_at(truths, preds);
      m.acc[kk] = acc_at(truths, preds, xbar).value_or(nan);
      m.mean_exp[kk] = exp_sum / static_cast<double>(V);
    } else {
      m.rmse[kk] = inf;
      m.acc[kk] = nan;
      m.mean_exp[kk] = inf;
    }
  }
  for (const auto& e : errors) m.valid_times.push_back(valid_time(e, ec.threshold, ec.dt));
  return m;
}

ComparisonResult run_comparison(const Trajectory& data, std::span<const VariantSpec> variants,
                                const ComparisonSetup& setup, const EvalConfig& ec, std::uint64_t seed) {
  ec.validate();
  if (variants.empty()) throw PreconditionError("no variants to compare");
  const Index n = data.rows();
  ComparisonResult result;
  result.train_rows = static_cast<Index>(std::floor(ec.train_fraction * static_cast<double>(n)));

  const Index lookback = setup.model.empirical ? empirical_lookback(*setup.model.empirical) : 0;
  const Index context = setup.train.window_len + lookback;
  const Index lo = std::max(result.train_rows, context);
  const Index hi = n - ec.max_horizon;
  if (hi - lo + 1 < ec.v_starts) {
    throw PreconditionError(fmt::format("test span [{}, {}] cannot hold {} start points with horizon {}", lo, hi,
                                        ec.v_starts, ec.max_horizon));
  }
  std::vector<Index> candidates(static_cast<std::size_t>(hi - lo + 1));
  std::iota(candidates.begin(), candidates.end(), lo);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  result.start_indices.reserve(static_cast<std::size_t>(ec.v_starts));
  std::sample(candidates.begin(), candidates.end(), std::back_inserter(result.start_indices), ec.v_starts, rng);

  Trajectory train_span{data.states.topRows(result.train_rows), data.dt};
  result.error_scale = error_scale(train_span);
  result.train_mean = train_span.states.colwise().mean().transpose();

  std::vector<RowMatrix> warmups;
  warmups.reserve(result.start_indices.size());
  for (Index s : result.start_indices) warmups.emplace_back(data.states.middleRows(s - context, context));

  for (const VariantSpec& v : variants) {
    std::vector<Prediction> preds;
    if (v.oracle) {
      for (Index s : result.start_indices) {
        preds.push_back(Prediction{Trajectory{data.states.middleRows(s, ec.max_horizon), data.dt}, false});
      }
      result.loss_histories.emplace_back();
    } else {
      TrainConfig tc = setup.train;
      tc.n_layers = v.n_layers;
      tc.seed = seed;
      ModelSpec spec = setup.model;
      spec.hybrid = v.hybrid;
      if (!v.hybrid) spec.empirical.reset();
      const TrainResult trained = train(train_span, tc, spec);
      result.loss_histories.push_back(trained.history);
      preds = predict_closed_loop_batch(trained.forecaster, warmups, ec.max_horizon);
    }
    result.series.push_back(score_rollouts(v.name, data, result.start_indices, preds, result.error_scale,
                                           result.train_mean, ec));
  }
  return result;
}

}  // namespace hlstm
