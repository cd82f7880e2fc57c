#include "hlstm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "hlstm/error.hpp"

namespace hlstm {

// --- normalization -----------------------------------------------------------

NormStats NormStats::identity(Index dim) { return {Vector::Zero(dim), Vector::Ones(dim)}; }

Vector NormStats::normalize(const Eigen::Ref<const Vector>& x) const {
  return ((x - mean).array() / std.array()).matrix();
}

Vector NormStats::denormalize(const Eigen::Ref<const Vector>& z) const {
  return (z.array() * std.array()).matrix() + mean;
}

RowMatrix NormStats::normalize_rows(const Eigen::Ref<const RowMatrix>& rows) const {
  RowMatrix out = rows;
  for (Index r = 0; r < out.rows(); ++r) {
    out.row(r) = ((rows.row(r) - mean.transpose()).array() / std.transpose().array()).matrix();
  }
  return out;
}

RowMatrix NormStats::denormalize_rows(const Eigen::Ref<const RowMatrix>& rows) const {
  RowMatrix out = rows;
  for (Index r = 0; r < out.rows(); ++r) {
    out.row(r) = (rows.row(r).array() * std.transpose().array()).matrix() + mean.transpose();
  }
  return out;
}

bool NormStats::operator==(const NormStats& other) const {
  return mean.size() == other.mean.size() && std.size() == other.std.size() && mean == other.mean &&
         std == other.std;
}

namespace {

NormStats stats_of_rows(const Eigen::Ref<const RowMatrix>& rows) {
  NormStats s;
  const double n = static_cast<double>(rows.rows());
  s.mean = rows.colwise().sum().transpose() / n;
  s.std.resize(rows.cols());
  for (Index j = 0; j < rows.cols(); ++j) {
    const double var = (rows.col(j).array() - s.mean[j]).square().sum() / n;
    const double sd = std::sqrt(var);
    s.std[j] = sd < kMinStd ? 1.0 : sd;
  }
  return s;
}

}  // namespace

NormStats fit_norm(const Trajectory& train) {
  if (train.rows() < 2) throw PreconditionError("fit_norm needs at least 2 rows");
  return stats_of_rows(train.states);
}

NormStats fit_increment_norm(const Trajectory& train) {
  if (train.rows() < 2) throw PreconditionError("fit_increment_norm needs at least 2 rows");
  const Index n = train.rows() - 1;
  const RowMatrix inc = train.states.bottomRows(n) - train.states.topRows(n);
  return stats_of_rows(inc);
}

// --- empirical models --------------------------------------------------------

int empirical_lookback(const EmpiricalModel& model) {
  return std::visit(
      [](const auto& m) -> int {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, MgEmpirical>) {
          return m.params.delay_steps();
        } else {
          return 0;
        }
      },
      model);
}

Vector evaluate_empirical(const EmpiricalModel& model, const Eigen::Ref<const RowMatrix>& frames, Index row) {
  return std::visit(
      [&](const auto& m) -> Vector {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, MgEmpirical>) {
          const Index k = m.params.delay_steps();
          if (row < k) {
            throw PreconditionError(fmt::format("frame {} has no delayed frame {} rows back", row, k));
          }
          return mg_empirical(frames.row(row).transpose(), frames.row(row - k).transpose(), m.params);
        } else {
          return ks_empirical(frames.row(row).transpose(), m.params);
        }
      },
      model);
}

// --- forecaster --------------------------------------------------------------

void HybridForecaster::validate() const {
  const NetConfig& cfg = config();
  cfg.validate();
  if (cfg.hybrid != empirical.has_value()) {
    throw ConfigError(cfg.hybrid ? "hybrid forecaster needs an empirical model"
                                 : "plain forecaster must not carry an empirical model");
  }
  if (state_norm.dim() != cfg.input_dim || target_norm.dim() != cfg.output_dim()) {
    throw ConfigError("normalization statistics do not match the network width");
  }
  if (empirical) {
    if (const auto* ks = std::get_if<KsEmpirical>(&*empirical)) {
      ks->params.validate();
      if (ks->params.grid_points != cfg.input_dim) throw ConfigError("KS grid size does not match input width");
    } else {
      std::get<MgEmpirical>(*empirical).params.validate();
    }
  }
}

Vector splice_frame(const HybridForecaster& f, const Eigen::Ref<const RowMatrix>& frames, Index row) {
  const NetConfig& cfg = f.config();
  Vector out(cfg.frame_dim());
  out.head(cfg.input_dim) = f.state_norm.normalize(frames.row(row).transpose());
  if (cfg.hybrid) {
    out.tail(cfg.empirical_dim) = f.target_norm.normalize(evaluate_empirical(*f.empirical, frames, row));
  }
  return out;
}

// --- samples -----------------------------------------------------------------

RowMatrix SampleSet::window(Index i) const {
  return frames.middleRows(starts.at(static_cast<std::size_t>(i)), window_len);
}

PackedWindows SampleSet::pack(std::span<const Index> samples) const {
  PackedWindows out;
  out.window_len = window_len;
  out.batch = static_cast<int>(samples.size());
  const Index B = out.batch;
  out.frames.resize(frames.cols(), window_len * B);
  for (Index b = 0; b < B; ++b) {
    const Index start = starts[static_cast<std::size_t>(samples[static_cast<std::size_t>(b)])];
    for (Index t = 0; t < window_len; ++t) out.frames.col(t * B + b) = frames.row(start + t).transpose();
  }
  return out;
}

Matrix SampleSet::pack_labels(std::span<const Index> samples) const {
  Matrix out(labels.cols(), static_cast<Index>(samples.size()));
  for (std::size_t b = 0; b < samples.size(); ++b) {
    out.col(static_cast<Index>(b)) = labels.row(samples[b]).transpose();
  }
  return out;
}

SampleSet make_windows(const Trajectory& train, const HybridForecaster& f) {
  const NetConfig& cfg = f.config();
  const Index d = cfg.window_len;
  const Index lookback = f.lookback();
  const Index n = train.rows();
  if (train.dim() != cfg.input_dim) {
    throw PreconditionError(fmt::format("trajectory width {} does not match network input {}", train.dim(),
                                        cfg.input_dim));
  }
  if (n < d + 1 + lookback) {
    throw PreconditionError(fmt::format("trajectory of {} rows is too short for windows of {} (+{} lookback)", n,
                                        d, lookback));
  }
  SampleSet s;
  s.window_len = static_cast<int>(d);
  s.frames = RowMatrix::Zero(n, cfg.frame_dim());
  for (Index r = lookback; r < n; ++r) s.frames.row(r) = splice_frame(f, train.states, r).transpose();

  const Index count = n - d - lookback;
  s.labels.resize(count, cfg.output_dim());
  s.starts.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    const Index start = lookback + i;
    const Index target = start + d;
    s.starts.push_back(start);
    const Vector y = cfg.residual_label ? Vector(train.states.row(target) - train.states.row(target - 1))
                                        : Vector(train.states.row(target));
    s.labels.row(i) = f.target_norm.normalize(y).transpose();
  }
  return s;
}

// --- training ----------------------------------------------------------------

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (window_len < 1) throw ConfigError("window_len must be >= 1");
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
  if (n_layers < 1) throw ConfigError("n_layers must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  LrSchedule{eta, gamma_decay}.validate();
}

NetConfig make_net_config(const TrainConfig& tc, const ModelSpec& spec, Index state_dim) {
  NetConfig cfg;
  cfg.n_layers = tc.n_layers;
  cfg.hidden_dim = tc.hidden_dim;
  cfg.input_dim = static_cast<int>(state_dim);
  cfg.window_len = tc.window_len;
  cfg.hybrid = spec.hybrid;
  cfg.empirical_dim = spec.hybrid ? cfg.input_dim : 0;
  cfg.residual_label = spec.residual_label;
  cfg.validate();
  return cfg;
}

HybridForecaster build_forecaster(const Trajectory& train, const TrainConfig& tc, const ModelSpec& spec) {
  if (spec.hybrid && !spec.empirical) throw ConfigError("hybrid model requested without an empirical model");
  if (spec.delay_embedded && train.dim() < 1) throw ConfigError("delay-embedded frames need width >= 1");
  HybridForecaster f;
  f.params = init_params(make_net_config(tc, spec, train.dim()), tc.seed);
  f.state_norm = fit_norm(train);
  f.target_norm = spec.residual_label ? fit_increment_norm(train) : f.state_norm;
  if (spec.hybrid) f.empirical = spec.empirical;
  f.delay_embedded = spec.delay_embedded;
  f.validate();
  return f;
}

TrainResult train(const Trajectory& train, const TrainConfig& tc, const ModelSpec& spec, const TrainResult* resume) {
  tc.validate();
  TrainResult r;
  if (resume) {
    r = *resume;
    if (r.forecaster.config() != make_net_config(tc, spec, train.dim())) {
      throw ConfigError("cannot resume: checkpoint shape differs from the training configuration");
    }
  } else {
    r.forecaster = build_forecaster(train, tc, spec);
    r.adam = AdamState::zeros(r.forecaster.params.size(), tc.beta1, tc.beta2, tc.eps_stab);
    r.schedule = LrSchedule{tc.eta, tc.gamma_decay};
  }
  if (r.epochs_done >= tc.epochs) return r;

  const SampleSet samples = make_windows(train, r.forecaster);
  const Index count = samples.count();
  if (count < 1) throw PreconditionError("no training samples");

  LstmStackParams& params = r.forecaster.params;
  std::vector<Index> order(static_cast<std::size_t>(count));
  for (int epoch = r.epochs_done; epoch < tc.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Index{0});
    std::seed_seq seq{static_cast<std::uint32_t>(tc.seed), static_cast<std::uint32_t>(tc.seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    int batches = 0;
    for (Index begin = 0; begin < count; begin += tc.batch_size) {
      const Index end = std::min<Index>(count, begin + tc.batch_size);
      const std::span<const Index> ids(order.data() + begin, static_cast<std::size_t>(end - begin));
      const double B = static_cast<double>(ids.size());

      const PackedWindows windows = samples.pack(ids);
      const Matrix labels = samples.pack_labels(ids);
      ForwardResult fw = stack_forward(windows, params);
      const Matrix residual = fw.output - labels;
      const double loss = residual.squaredNorm() / B + l2_penalty(params, tc.lambda);
      if (!std::isfinite(loss)) {
        throw DivergenceError(fmt::format("non-finite training loss at epoch {} batch {}", epoch + 1, batches + 1));
      }
      LstmStackParams grads = backward(fw.tape, (2.0 / B) * residual, params);
      l2_regularized_gradient(grads, params, tc.lambda);
      clip_global_norm(grads, tc.clip_norm);
      if (tc.optimizer == OptimizerKind::adam) {
        adam_step(params.values(), grads.values(), r.adam, r.schedule.eta);
      } else {
        sgd_step(params.values(), grads.values(), r.schedule.eta);
      }
      loss_sum += loss;
      ++batches;
    }
    r.history.push_back(EpochStats{epoch + 1, loss_sum / batches, r.schedule.eta});
    r.schedule = decay_lr(r.schedule);
    r.epochs_done = epoch + 1;
  }
  return r;
}

// --- closed-loop prediction --------------------------------------------------

namespace {

bool frame_ok(const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]) || std::abs(v[i]) > kBlowupGuard) return false;
  }
  return true;
}

struct Rollout {
  RowMatrix physical;
  RowMatrix spliced;
  Index filled = 0;
  bool diverged = false;
};

}  // namespace

std::vector<Prediction> predict_closed_loop_batch(const HybridForecaster& f, std::span<const RowMatrix> histories,
                                                  Index n_steps) {
  f.validate();
  if (n_steps < 0) throw PreconditionError("n_steps must be >= 0");
  const NetConfig& cfg = f.config();
  const Index ctx = f.context_len();
  const Index d = cfg.window_len;
  const Index lookback = f.lookback();

  std::vector<Rollout> runs(histories.size());
  for (std::size_t b = 0; b < histories.size(); ++b) {
    const RowMatrix& h = histories[b];
    if (h.rows() < ctx || h.cols() != cfg.input_dim) {
      throw PreconditionError(fmt::format("rollout needs {} warmup frames of width {}, got {}x{}", ctx,
                                          cfg.input_dim, h.rows(), h.cols()));
    }
    Rollout& run = runs[b];
    run.physical.resize(ctx + n_steps, cfg.input_dim);
    run.spliced.resize(ctx + n_steps, cfg.frame_dim());
    run.physical.topRows(ctx) = h.bottomRows(ctx);
    run.filled = ctx;
    try {
      for (Index r = lookback; r < ctx; ++r) run.spliced.row(r) = splice_frame(f, run.physical, r).transpose();
    } catch (const BlowupError&) {
      run.diverged = true;
    }
  }

  std::vector<std::size_t> active;
  for (Index step = 0; step < n_steps; ++step) {
    active.clear();
    for (std::size_t b = 0; b < runs.size(); ++b) {
      if (!runs[b].diverged) active.push_back(b);
    }
    if (active.empty()) break;

    const Index B = static_cast<Index>(active.size());
    PackedWindows windows;
    windows.window_len = static_cast<int>(d);
    windows.batch = static_cast<int>(B);
    windows.frames.resize(cfg.frame_dim(), d * B);
    for (Index k = 0; k < B; ++k) {
      const Rollout& run = runs[active[static_cast<std::size_t>(k)]];
      const Index first = run.filled - d;
      for (Index t = 0; t < d; ++t) windows.frames.col(t * B + k) = run.spliced.row(first + t).transpose();
    }
    const Matrix out = stack_predict(windows, f.params);

    for (Index k = 0; k < B; ++k) {
      Rollout& run = runs[active[static_cast<std::size_t>(k)]];
      const Vector newest = run.physical.row(run.filled - 1).transpose();
      const Vector y = f.target_norm.denormalize(out.col(k));
      Vector next(cfg.input_dim);
      if (f.delay_embedded) {
        next[0] = cfg.residual_label ? newest[0] + y[0] : y[0];
        next.tail(cfg.input_dim - 1) = newest.head(cfg.input_dim - 1);
      } else {
        next = cfg.residual_label ? Vector(newest + y) : y;
      }
      if (!frame_ok(next)) {
        run.diverged = true;
        continue;
      }
      run.physical.row(run.filled) = next.transpose();
      try {
        const Vector s = splice_frame(f, run.physical.topRows(run.filled + 1), run.filled);
        if (!frame_ok(s)) {
          run.diverged = true;
          continue;
        }
        run.spliced.row(run.filled) = s.transpose();
      } catch (const BlowupError&) {
        run.diverged = true;
        continue;
      }
      ++run.filled;
    }
  }

  std::vector<Prediction> out(runs.size());
  for (std::size_t b = 0; b < runs.size(); ++b) {
    const Index produced = runs[b].filled - ctx;
    out[b].frames.dt = 0.0;
    out[b].frames.states = runs[b].physical.middleRows(ctx, produced);
    out[b].diverged = runs[b].diverged;
  }
  return out;
}

Prediction predict_closed_loop(const HybridForecaster& f, const Eigen::Ref<const RowMatrix>& history, Index n_steps) {
  const std::vector<RowMatrix> one{RowMatrix(history)};
  return std::move(predict_closed_loop_batch(f, one, n_steps).front());
}

}  // namespace hlstm
