#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hlstm/types.hpp"

namespace hlstm {

/// Shape of a stacked LSTM forecaster. With n_layers == 1 the model is the
/// single-layer baseline.
struct NetConfig {
  int n_layers = 1;
  int hidden_dim = 8;
  /// State dimension d_i; also the output dimension.
  int input_dim = 1;
  /// Frames per input window; also the truncation length of BPTT.
  int window_len = 1;
  bool hybrid = false;
  /// input_dim when hybrid, else 0.
  int empirical_dim = 0;
  /// Labels are increments x_{t+d} - x_{t+d-1} instead of absolute states.
  bool residual_label = false;

  int frame_dim() const { return input_dim + empirical_dim; }
  int output_dim() const { return input_dim; }
  int layer_input_dim(int layer) const { return layer == 0 ? frame_dim() : hidden_dim; }
  void validate() const;

  bool operator==(const NetConfig&) const = default;
};

/// Gate order inside the stacked gate matrices.
enum class Gate : int { input = 0, forget = 1, output = 2, cell = 3 };
inline constexpr int kGateCount = 4;

/// One contiguous tensor inside the flat parameter vector (column-major).
struct TensorSlot {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  Index offset = 0;
  /// Weight matrices are regularized; biases are not.
  bool is_weight = false;

  Index size() const { return rows * cols; }
};

template <typename MatrixMap, typename VectorMap>
struct LstmLayerView {
  /// [W_xi; W_xf; W_xo; W_xc], 4*d_h x layer input width.
  MatrixMap W_x;
  /// [W_hi; W_hf; W_ho; W_hc], 4*d_h x d_h.
  MatrixMap W_h;
  /// [b_i; b_f; b_o; b_c].
  VectorMap b;
  Index hidden_dim;

  auto input_weights(Gate g) { return W_x.middleRows(static_cast<Index>(g) * hidden_dim, hidden_dim); }
  auto recurrent_weights(Gate g) { return W_h.middleRows(static_cast<Index>(g) * hidden_dim, hidden_dim); }
  auto bias(Gate g) { return b.segment(static_cast<Index>(g) * hidden_dim, hidden_dim); }
};

template <typename MatrixMap, typename VectorMap>
struct ReadoutView {
  /// d_o x d_h.
  MatrixMap W_hy;
  /// d_o x d_i; 0 x 0 for plain models.
  MatrixMap W_ey;
  VectorMap b_y;
};

using LstmLayerParams = LstmLayerView<Eigen::Map<Matrix>, Eigen::Map<Vector>>;
using ConstLstmLayerParams = LstmLayerView<Eigen::Map<const Matrix>, Eigen::Map<const Vector>>;
using ReadoutParams = ReadoutView<Eigen::Map<Matrix>, Eigen::Map<Vector>>;
using ConstReadoutParams = ReadoutView<Eigen::Map<const Matrix>, Eigen::Map<const Vector>>;

/// All trainable parameters of the stack plus readout, in one flat vector.
/// Slot order: for each layer W_x, W_h, b; then W_hy, [W_ey,] b_y.
/// Gradients use the same type and layout.
class LstmStackParams {
 public:
  LstmStackParams() = default;
  /// Zero-filled parameters for the given shape.
  explicit LstmStackParams(const NetConfig& cfg);

  const NetConfig& config() const { return cfg_; }
  const std::vector<TensorSlot>& slots() const { return slots_; }
  Vector& values() { return values_; }
  const Vector& values() const { return values_; }
  Index size() const { return values_.size(); }

  Eigen::Map<Matrix> tensor(std::size_t slot);
  Eigen::Map<const Matrix> tensor(std::size_t slot) const;

  LstmLayerParams layer(int n);
  ConstLstmLayerParams layer(int n) const;
  ReadoutParams readout();
  ConstReadoutParams readout() const;

  LstmStackParams zeros_like() const;

  bool operator==(const LstmStackParams& other) const;

 private:
  NetConfig cfg_;
  std::vector<TensorSlot> slots_;
  Vector values_;
};

/// Xavier-uniform weights, bound sqrt(6 / (fan_in + fan_out)) per gate
/// block; biases zero except the forget bias, which starts at 1.
LstmStackParams init_params(const NetConfig& cfg, std::uint64_t seed);

/// Single-sample cell update. Returns the new (h, c) in `state_h`/`state_c`.
void cell_forward(const Eigen::Ref<const Vector>& x, const ConstLstmLayerParams& p, Vector& state_h,
                  Vector& state_c);

/// Activations of one layer over a batch of windows. Column t*B + b holds
/// time step t of sample b.
struct LayerTape {
  /// Sigmoid i, f, o and tanh candidate, stacked like the gate matrices.
  Matrix gates;
  Matrix cells;
  Matrix cell_tanh;
  Matrix hidden;
};

struct TapeRecord {
  int window_len = 0;
  int batch = 0;
  /// Layer-0 inputs, frame_dim x (window_len * batch).
  Matrix inputs;
  std::vector<LayerTape> layers;
  Matrix output;
};

/// Windows packed column-wise: column t*B + b is frame t (oldest first) of
/// sample b. Hybrid frames are [x, E(x)].
struct PackedWindows {
  Matrix frames;
  int window_len = 0;
  int batch = 0;
};

/// Pack a single window given as window_len x frame_dim, oldest row first.
PackedWindows pack_window(const Eigen::Ref<const RowMatrix>& window);

struct ForwardResult {
  /// output_dim x batch.
  Matrix output;
  TapeRecord tape;
};

/// Zero initial state at every layer; layer n reads layer n-1's hidden
/// sequence; output = W_hy h_last + b_y (+ W_ey E(last frame) when hybrid).
ForwardResult stack_forward(const PackedWindows& windows, const LstmStackParams& params);

/// Output of stack_forward without the tape.
Matrix stack_predict(const PackedWindows& windows, const LstmStackParams& params);

/// Reverse accumulation of grad_out (dLoss/dOutput, output_dim x batch)
/// through the full window.
LstmStackParams backward(const TapeRecord& tape, const Eigen::Ref<const Matrix>& grad_out,
                         const LstmStackParams& params);

/// lambda * sum of squared weight entries (biases excluded).
double l2_penalty(const LstmStackParams& params, double lambda);

/// Adds 2 * lambda * w to every weight-matrix gradient.
void l2_regularized_gradient(LstmStackParams& grads, const LstmStackParams& params, double lambda);

/// Rescales grads so their global L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_global_norm(LstmStackParams& grads, double max_norm);

}  // namespace hlstm
