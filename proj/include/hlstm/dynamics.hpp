#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>

#include "hlstm/types.hpp"

namespace hlstm {

/// Mackey-Glass delay equation
///   dx/dt = beta * x(t - tau) / (1 + x(t - tau)^n) - gamma * x(t)
/// The empirical (mismatched) model replaces gamma by gamma * (1 + epsilon).
struct MgParams {
  double beta = 2.0;
  double gamma = 1.0;
  double n_exp = 9.65;
  double tau = 2.0;
  double dt = 0.1;
  double epsilon = 0.05;

  /// tau / dt; throws ConfigError unless it is a positive integer.
  int delay_steps() const;
  void validate() const;

  bool operator==(const MgParams&) const = default;
};

/// Initial history x(t) = value on [-tau, 0], with a seeded uniform kick of
/// the given amplitude added at t = 0.
struct MgInitialHistory {
  double value = 0.5;
  double perturbation = 1e-3;

  bool operator==(const MgInitialHistory&) const = default;
};

/// One-dimensional Kuramoto-Sivashinsky equation on [0, L] with
/// u = u_x = 0 at both ends, discretized on grid_points nodes.
struct KsParams {
  double viscosity = 1.0;
  double domain_length = 35.0;
  int grid_points = 65;
  double dt = 0.25;
  double epsilon = 0.05;
  /// RK2 sub-steps per sampling interval dt.
  int inner_steps = 200;

  double dx() const { return domain_length / (grid_points - 1); }
  double inner_dt() const { return dt / inner_steps; }
  /// Explicit stability bound on the inner step, dx^4 / (8 v).
  double max_stable_inner_dt() const;
  void validate() const;

  bool operator==(const KsParams&) const = default;
};

/// u(x) = amplitude * sum_{k=1..modes} a_k sin(k pi x / L), a_k ~ U[-1, 1].
struct KsInitialCondition {
  double amplitude = 0.1;
  int modes = 5;

  bool operator==(const KsInitialCondition&) const = default;
};

/// States in physical units, one row per time step.
struct Trajectory {
  RowMatrix states;
  double dt = 0.0;

  Index rows() const { return states.rows(); }
  Index dim() const { return states.cols(); }
};

/// Any |state| above this aborts integration with a BlowupError.
inline constexpr double kBlowupGuard = 1e6;

// --- Mackey-Glass --------------------------------------------------------

/// Right-hand side of the delay equation; `mismatch` scales gamma by (1 + mismatch).
double mg_rhs(double x, double x_delayed, const MgParams& p, double mismatch = 0.0);

/// Heun (explicit trapezoidal) step. `history` is oldest-first with x(t) last
/// and must hold at least delay_steps() + 1 values.
double mg_step(std::span<const double> history, const MgParams& p, bool use_epsilon);

Trajectory mg_trajectory(const MgParams& p, Index n_steps, Index transient, std::uint64_t seed,
                         const MgInitialHistory& init = {});

/// Delay embedding. Row t is (x_{t+(m-1)lag}, ..., x_{t+lag}, x_t), newest first.
Trajectory mg_embed(const Trajectory& series, int embed_dim, int lag_steps);

/// dt * dx/dt under the mismatched model, for every embedded coordinate.
/// `delayed` is the embedded frame delay_steps() rows earlier, whose
/// coordinate k is the delayed value for coordinate k of `frame`.
Vector mg_empirical(const Eigen::Ref<const Vector>& frame, const Eigen::Ref<const Vector>& delayed,
                    const MgParams& p);

// --- Kuramoto-Sivashinsky ------------------------------------------------

/// Method-of-lines right-hand side with ghost nodes u_{-1} = u_1 and
/// u_D = u_{D-2}. Boundary entries are zero. `second_derivative_scale` is
/// 1 for the true system and 1 + epsilon for the empirical one.
Vector ks_rhs(const Eigen::Ref<const Vector>& u, const KsParams& p, double second_derivative_scale = 1.0);

/// n_inner explicit RK2 steps of size h, with the Dirichlet condition
/// re-imposed after each step.
Vector ks_integrate(const Eigen::Ref<const Vector>& u, const KsParams& p, bool use_epsilon, double h,
                    int n_inner);

/// Advance one sampling interval dt.
Vector ks_step(const Eigen::Ref<const Vector>& u, const KsParams& p, bool use_epsilon);

/// Empirical one-step map: ks_step under the mismatched model.
Vector ks_empirical(const Eigen::Ref<const Vector>& u, const KsParams& p);

Vector ks_initial_condition(const KsParams& p, std::uint64_t seed, const KsInitialCondition& ic = {});

Trajectory ks_trajectory(const KsParams& p, Index n_steps, Index transient, std::uint64_t seed,
                         const KsInitialCondition& ic = {});

// --- CSV -----------------------------------------------------------------

/// Header `t,x0,x1,...`; column t is (first_step + row) * dt; 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, Index first_step = 0);
void write_trajectory_csv(const std::string& path, const Trajectory& traj, Index first_step = 0);

/// dt is recovered from the t column (0 when there is a single row).
Trajectory read_trajectory_csv(const std::string& path);

}  // namespace hlstm
