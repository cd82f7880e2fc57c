#include "hlstm/net.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "hlstm/error.hpp"

namespace hlstm {

void NetConfig::validate() const {
  if (n_layers < 1) throw ConfigError(fmt::format("n_layers must be >= 1, got {}", n_layers));
  if (hidden_dim < 1) throw ConfigError(fmt::format("hidden_dim must be >= 1, got {}", hidden_dim));
  if (input_dim < 1) throw ConfigError(fmt::format("input_dim must be >= 1, got {}", input_dim));
  if (window_len < 1) throw ConfigError(fmt::format("window_len must be >= 1, got {}", window_len));
  if (empirical_dim != (hybrid ? input_dim : 0)) {
    throw ConfigError(fmt::format("empirical_dim must be {} for a {} model, got {}", hybrid ? input_dim : 0,
                                  hybrid ? "hybrid" : "plain", empirical_dim));
  }
}

// --- parameter container -------------------------------------------------

LstmStackParams::LstmStackParams(const NetConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Index offset = 0;
  auto add = [&](std::string name, Index rows, Index cols, bool is_weight) {
    slots_.push_back(TensorSlot{std::move(name), rows, cols, offset, is_weight});
    offset += rows * cols;
  };
  const Index h = cfg.hidden_dim;
  for (int n = 0; n < cfg.n_layers; ++n) {
    add(fmt::format("layer{}.W_x", n), kGateCount * h, cfg.layer_input_dim(n), true);
    add(fmt::format("layer{}.W_h", n), kGateCount * h, h, true);
    add(fmt::format("layer{}.b", n), kGateCount * h, 1, false);
  }
  add("readout.W_hy", cfg.output_dim(), h, true);
  if (cfg.hybrid) add("readout.W_ey", cfg.output_dim(), cfg.empirical_dim, true);
  add("readout.b_y", cfg.output_dim(), 1, false);
  values_ = Vector::Zero(offset);
}

Eigen::Map<Matrix> LstmStackParams::tensor(std::size_t slot) {
  const TensorSlot& s = slots_.at(slot);
  return {values_.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<const Matrix> LstmStackParams::tensor(std::size_t slot) const {
  const TensorSlot& s = slots_.at(slot);
  return {values_.data() + s.offset, s.rows, s.cols};
}

LstmLayerParams LstmStackParams::layer(int n) {
  const auto base = static_cast<std::size_t>(3 * n);
  const TensorSlot& b = slots_.at(base + 2);
  return {tensor(base), tensor(base + 1), Eigen::Map<Vector>(values_.data() + b.offset, b.rows),
          cfg_.hidden_dim};
}

ConstLstmLayerParams LstmStackParams::layer(int n) const {
  const auto base = static_cast<std::size_t>(3 * n);
  const TensorSlot& b = slots_.at(base + 2);
  return {tensor(base), tensor(base + 1), Eigen::Map<const Vector>(values_.data() + b.offset, b.rows),
          cfg_.hidden_dim};
}

ReadoutParams LstmStackParams::readout() {
  const auto base = static_cast<std::size_t>(3 * cfg_.n_layers);
  const std::size_t bias_slot = base + (cfg_.hybrid ? 2 : 1);
  const TensorSlot& b = slots_.at(bias_slot);
  return {tensor(base), cfg_.hybrid ? tensor(base + 1) : Eigen::Map<Matrix>(nullptr, 0, 0),
          Eigen::Map<Vector>(values_.data() + b.offset, b.rows)};
}

ConstReadoutParams LstmStackParams::readout() const {
  const auto base = static_cast<std::size_t>(3 * cfg_.n_layers);
  const std::size_t bias_slot = base + (cfg_.hybrid ? 2 : 1);
  const TensorSlot& b = slots_.at(bias_slot);
  return {tensor(base), cfg_.hybrid ? tensor(base + 1) : Eigen::Map<const Matrix>(nullptr, 0, 0),
          Eigen::Map<const Vector>(values_.data() + b.offset, b.rows)};
}

LstmStackParams LstmStackParams::zeros_like() const {
  LstmStackParams out = *this;
  out.values_.setZero();
  return out;
}

bool LstmStackParams::operator==(const LstmStackParams& other) const {
  return cfg_ == other.cfg_ && values_.size() == other.values_.size() && values_ == other.values_;
}

LstmStackParams init_params(const NetConfig& cfg, std::uint64_t seed) {
  LstmStackParams params(cfg);
  std::mt19937_64 rng(seed);
  const auto& slots = params.slots();
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (!slots[k].is_weight) continue;
    // Gate matrices hold four d_h-row blocks; fan_out is d_h for each.
    const bool gate = slots[k].name.rfind("layer", 0) == 0;
    const double fan_out = gate ? static_cast<double>(cfg.hidden_dim) : static_cast<double>(slots[k].rows);
    const double fan_in = static_cast<double>(slots[k].cols);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto w = params.tensor(k);
    for (Index j = 0; j < w.cols(); ++j) {
      for (Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
    }
  }
  for (int n = 0; n < cfg.n_layers; ++n) params.layer(n).bias(Gate::forget).setOnes();
  // The empirical readout starts as the identity, i.e. at the empirical forecaster.
  if (cfg.hybrid) {
    params.readout().W_ey.setIdentity();
    params.readout().W_hy.setZero();
  }
  return params;
}

// --- forward ---------------------------------------------------------------

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Gate nonlinearities and state update for one time step. Scalar loops keep
// the result independent of memory alignment, which Eigen's packet math is not.
void pointwise_step(const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Matrix>& c_prev, bool has_prev,
                    Eigen::Ref<Matrix> gates, Eigen::Ref<Matrix> c, Eigen::Ref<Matrix> c_tanh,
                    Eigen::Ref<Matrix> hidden) {
  const Index h = c.rows();
  for (Index b = 0; b < z.cols(); ++b) {
    for (Index k = 0; k < h; ++k) {
      const double ig = sigmoid(z(k, b));
      const double fg = sigmoid(z(h + k, b));
      const double og = sigmoid(z(2 * h + k, b));
      const double cand = std::tanh(z(3 * h + k, b));
      gates(k, b) = ig;
      gates(h + k, b) = fg;
      gates(2 * h + k, b) = og;
      gates(3 * h + k, b) = cand;
      const double cell = has_prev ? fg * c_prev(k, b) + ig * cand : ig * cand;
      c(k, b) = cell;
      c_tanh(k, b) = std::tanh(cell);
      hidden(k, b) = og * c_tanh(k, b);
    }
  }
}

}  // namespace

void cell_forward(const Eigen::Ref<const Vector>& x, const ConstLstmLayerParams& p, Vector& state_h,
                  Vector& state_c) {
  const Index h = p.hidden_dim;
  // Same summation order as layer_forward, so a one-layer stack agrees bit for bit.
  Matrix z = p.W_x * x;
  z.colwise() += p.b;
  z.noalias() += p.W_h * state_h;
  Matrix gates(kGateCount * h, 1), c(h, 1), ct(h, 1), hid(h, 1);
  pointwise_step(z, state_c, true, gates, c, ct, hid);
  state_c = c.col(0);
  state_h = hid.col(0);
}

PackedWindows pack_window(const Eigen::Ref<const RowMatrix>& window) {
  PackedWindows out;
  out.window_len = static_cast<int>(window.rows());
  out.batch = 1;
  out.frames = window.transpose();
  return out;
}

namespace {

void check_windows(const PackedWindows& windows, const NetConfig& cfg) {
  if (windows.window_len != cfg.window_len) {
    throw PreconditionError(
        fmt::format("window has {} frames, network expects {}", windows.window_len, cfg.window_len));
  }
  if (windows.batch < 1) throw PreconditionError("empty batch");
  if (windows.frames.rows() != cfg.frame_dim() ||
      windows.frames.cols() != static_cast<Index>(windows.window_len) * windows.batch) {
    throw PreconditionError(fmt::format("packed windows are {}x{}, expected {}x{}", windows.frames.rows(),
                                        windows.frames.cols(), cfg.frame_dim(),
                                        static_cast<Index>(windows.window_len) * windows.batch));
  }
}

// Runs one layer over the whole window. `inputs` is width x (d*B).
void layer_forward(const Eigen::Ref<const Matrix>& inputs, const ConstLstmLayerParams& p, int d, int batch,
                   LayerTape& tape) {
  const Index h = p.hidden_dim;
  const Index B = batch;
  Matrix z(kGateCount * h, inputs.cols());
  tape.gates.resize(kGateCount * h, z.cols());
  tape.cells.resize(h, z.cols());
  tape.cell_tanh.resize(h, z.cols());
  tape.hidden.resize(h, z.cols());
  for (int t = 0; t < d; ++t) {
    auto zt = z.middleCols(t * B, B);
    zt.noalias() = p.W_x * inputs.middleCols(t * B, B);
    zt.colwise() += p.b;
    if (t > 0) zt.noalias() += p.W_h * tape.hidden.middleCols((t - 1) * B, B);
    const auto prev = tape.cells.middleCols(t > 0 ? (t - 1) * B : 0, B);
    pointwise_step(zt, prev, t > 0, tape.gates.middleCols(t * B, B), tape.cells.middleCols(t * B, B),
                   tape.cell_tanh.middleCols(t * B, B), tape.hidden.middleCols(t * B, B));
  }
}

}  // namespace

ForwardResult stack_forward(const PackedWindows& windows, const LstmStackParams& params) {
  const NetConfig& cfg = params.config();
  check_windows(windows, cfg);
  const int d = windows.window_len;
  const int B = windows.batch;

  ForwardResult result;
  TapeRecord& tape = result.tape;
  tape.window_len = d;
  tape.batch = B;
  tape.inputs = windows.frames;
  tape.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (int n = 0; n < cfg.n_layers; ++n) {
    const Matrix& in = n == 0 ? tape.inputs : tape.layers[static_cast<std::size_t>(n - 1)].hidden;
    layer_forward(in, params.layer(n), d, B, tape.layers[static_cast<std::size_t>(n)]);
  }

  const auto ro = params.readout();
  const auto last = static_cast<Index>(d - 1) * B;
  result.output = ro.W_hy * tape.layers.back().hidden.middleCols(last, B);
  if (cfg.hybrid) {
    result.output.noalias() += ro.W_ey * tape.inputs.block(cfg.input_dim, last, cfg.empirical_dim, B);
  }
  result.output.colwise() += ro.b_y;
  tape.output = result.output;
  return result;
}

Matrix stack_predict(const PackedWindows& windows, const LstmStackParams& params) {
  return stack_forward(windows, params).output;
}

// --- backward --------------------------------------------------------------

LstmStackParams backward(const TapeRecord& tape, const Eigen::Ref<const Matrix>& grad_out,
                         const LstmStackParams& params) {
  const NetConfig& cfg = params.config();
  const int d = tape.window_len;
  const Index B = tape.batch;
  if (static_cast<int>(tape.layers.size()) != cfg.n_layers || d != cfg.window_len ||
      tape.inputs.rows() != cfg.frame_dim()) {
    throw PreconditionError("tape does not match the parameter configuration");
  }
  if (grad_out.rows() != cfg.output_dim() || grad_out.cols() != B) {
    throw PreconditionError(fmt::format("grad_out is {}x{}, expected {}x{}", grad_out.rows(), grad_out.cols(),
                                        cfg.output_dim(), B));
  }

  LstmStackParams grads = params.zeros_like();
  const Index h = cfg.hidden_dim;
  const Index cols = static_cast<Index>(d) * B;
  const Index last = cols - B;

  const auto ro = params.readout();
  auto gro = grads.readout();
  gro.W_hy.noalias() = grad_out * tape.layers.back().hidden.middleCols(last, B).transpose();
  if (cfg.hybrid) {
    gro.W_ey.noalias() = grad_out * tape.inputs.block(cfg.input_dim, last, cfg.empirical_dim, B).transpose();
  }
  gro.b_y = grad_out.rowwise().sum();

  // Gradient reaching each layer's hidden sequence from above.
  Matrix dh_above = Matrix::Zero(h, cols);
  dh_above.middleCols(last, B).noalias() = ro.W_hy.transpose() * grad_out;

  Matrix dz(kGateCount * h, cols);
  Matrix dh_next(h, B);
  Matrix dc_next(h, B);
  Matrix dh(h, B);
  Matrix dc(h, B);
  for (int n = cfg.n_layers - 1; n >= 0; --n) {
    const LayerTape& lt = tape.layers[static_cast<std::size_t>(n)];
    const auto p = params.layer(n);
    dh_next.setZero();
    dc_next.setZero();
    for (int t = d - 1; t >= 0; --t) {
      const Index c0 = static_cast<Index>(t) * B;
      const auto gates = lt.gates.middleCols(c0, B).array();
      const auto i = gates.topRows(h);
      const auto f = gates.middleRows(h, h);
      const auto o = gates.middleRows(2 * h, h);
      const auto g = gates.bottomRows(h);
      const auto tc = lt.cell_tanh.middleCols(c0, B).array();

      dh = dh_above.middleCols(c0, B) + dh_next;
      dc = (dh.array() * o * (1.0 - tc.square()) + dc_next.array()).matrix();

      auto dzt = dz.middleCols(c0, B);
      dzt.topRows(h) = (dc.array() * g * i * (1.0 - i)).matrix();
      if (t > 0) {
        dzt.middleRows(h, h) = (dc.array() * lt.cells.middleCols(c0 - B, B).array() * f * (1.0 - f)).matrix();
      } else {
        dzt.middleRows(h, h).setZero();
      }
      dzt.middleRows(2 * h, h) = (dh.array() * tc * o * (1.0 - o)).matrix();
      dzt.bottomRows(h) = (dc.array() * i * (1.0 - g.square())).matrix();

      dh_next.noalias() = p.W_h.transpose() * dzt;
      dc_next = (dc.array() * f).matrix();
    }

    auto gl = grads.layer(n);
    const Matrix& in = n == 0 ? tape.inputs : tape.layers[static_cast<std::size_t>(n - 1)].hidden;
    gl.W_x.noalias() = dz * in.transpose();
    if (d > 1) gl.W_h.noalias() = dz.rightCols(cols - B) * lt.hidden.leftCols(cols - B).transpose();
    gl.b = dz.rowwise().sum();
    if (n > 0) dh_above.noalias() = p.W_x.transpose() * dz;
  }
  return grads;
}

double l2_penalty(const LstmStackParams& params, double lambda) {
  double sum = 0.0;
  for (std::size_t k = 0; k < params.slots().size(); ++k) {
    if (params.slots()[k].is_weight) sum += params.tensor(k).squaredNorm();
  }
  return lambda * sum;
}

void l2_regularized_gradient(LstmStackParams& grads, const LstmStackParams& params, double lambda) {
  if (lambda == 0.0) return;
  if (grads.size() != params.size()) throw PreconditionError("gradient/parameter size mismatch");
  for (std::size_t k = 0; k < params.slots().size(); ++k) {
    if (params.slots()[k].is_weight) grads.tensor(k) += (2.0 * lambda) * params.tensor(k);
  }
}

double clip_global_norm(LstmStackParams& grads, double max_norm) {
  const double norm = grads.values().norm();
  if (max_norm > 0.0 && norm > max_norm) grads.values() *= max_norm / norm;
  return norm;
}

}  // namespace hlstm
