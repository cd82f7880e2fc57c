#include "hlstm/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "hlstm/error.hpp"

namespace hlstm {

namespace {

bool out_of_guard(double v) { return !std::isfinite(v) || std::abs(v) > kBlowupGuard; }

bool out_of_guard(const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) {
    if (out_of_guard(v[i])) return true;
  }
  return false;
}

}  // namespace

int MgParams::delay_steps() const {
  if (!(dt > 0.0) || !(tau > 0.0)) {
    throw ConfigError(fmt::format("mackey-glass needs dt > 0 and tau > 0 (dt={}, tau={})", dt, tau));
  }
  const double ratio = tau / dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError(fmt::format("tau/dt must be a positive integer, got {}", ratio));
  }
  return static_cast<int>(rounded);
}

void MgParams::validate() const {
  delay_steps();
  if (!std::isfinite(beta) || !std::isfinite(gamma) || !std::isfinite(n_exp) || !std::isfinite(epsilon)) {
    throw ConfigError("mackey-glass parameters must be finite");
  }
}

double KsParams::max_stable_inner_dt() const {
  const double h = dx();
  return h * h * h * h / (8.0 * viscosity);
}

void KsParams::validate() const {
  if (grid_points < 5) {
    throw ConfigError(fmt::format("KS grid needs at least 5 points for the 5-point stencil, got {}", grid_points));
  }
  if (!(domain_length > 0.0) || !(dt > 0.0) || !(viscosity > 0.0)) {
    throw ConfigError("KS domain_length, dt and viscosity must be positive");
  }
  if (inner_steps < 1) throw ConfigError("KS inner_steps must be >= 1");
  if (inner_dt() > max_stable_inner_dt()) {
    throw ConfigError(fmt::format("KS inner step {} exceeds the explicit stability bound dx^4/(8v) = {}; "
                                  "raise inner_steps",
                                  inner_dt(), max_stable_inner_dt()));
  }
}

// --- Mackey-Glass --------------------------------------------------------

double mg_rhs(double x, double x_delayed, const MgParams& p, double mismatch) {
  return p.beta * x_delayed / (1.0 + std::pow(x_delayed, p.n_exp)) - p.gamma * (1.0 + mismatch) * x;
}

double mg_step(std::span<const double> history, const MgParams& p, bool use_epsilon) {
  const auto k = static_cast<std::size_t>(p.delay_steps());
  if (history.size() < k + 1) {
    throw PreconditionError(
        fmt::format("mg_step needs {} history values, got {}", k + 1, history.size()));
  }
  const double mismatch = use_epsilon ? p.epsilon : 0.0;
  const std::size_t now = history.size() - 1;
  const double x = history[now];
  // Stage 1 reads x(t - tau); stage 2 reads x(t + dt - tau), one step newer.
  const double slope1 = mg_rhs(x, history[now - k], p, mismatch);
  const double predictor = x + p.dt * slope1;
  const double slope2 = mg_rhs(predictor, history[now - k + 1], p, mismatch);
  return x + 0.5 * p.dt * (slope1 + slope2);
}

Trajectory mg_trajectory(const MgParams& p, Index n_steps, Index transient, std::uint64_t seed,
                         const MgInitialHistory& init) {
  p.validate();
  if (n_steps < 1) throw PreconditionError("mg_trajectory needs n_steps >= 1");
  if (transient < 0) throw PreconditionError("mg_trajectory needs transient >= 0");

  const int k = p.delay_steps();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> kick(-init.perturbation, init.perturbation);

  std::vector<double> history(static_cast<std::size_t>(k) + 1, init.value);
  if (init.perturbation > 0.0) history.back() += kick(rng);
  history.reserve(history.size() + static_cast<std::size_t>(transient + n_steps));

  Trajectory out;
  out.dt = p.dt;
  out.states.resize(n_steps, 1);

  const Index total = transient + n_steps;
  for (Index step = 0; step < total; ++step) {
    if (step > 0) {
      const double next = mg_step(history, p, false);
      if (out_of_guard(next)) {
        throw BlowupError(fmt::format("mackey-glass integration blew up at step {}", step), step);
      }
      history.push_back(next);
    }
    if (step >= transient) out.states(step - transient, 0) = history.back();
  }
  return out;
}

Trajectory mg_embed(const Trajectory& series, int embed_dim, int lag_steps) {
  if (embed_dim < 1 || lag_steps < 1) throw PreconditionError("embedding needs embed_dim >= 1 and lag >= 1");
  if (series.dim() != 1) throw PreconditionError("embedding expects a scalar series");
  const Index span = static_cast<Index>(embed_dim - 1) * lag_steps;
  if (series.rows() < span + 1) {
    throw PreconditionError(fmt::format("series of length {} too short for embedding span {}", series.rows(), span + 1));
  }
  Trajectory out;
  out.dt = series.dt;
  out.states.resize(series.rows() - span, embed_dim);
  for (Index t = 0; t < out.rows(); ++t) {
    for (int j = 0; j < embed_dim; ++j) {
      out.states(t, j) = series.states(t + span - static_cast<Index>(j) * lag_steps, 0);
    }
  }
  return out;
}

Vector mg_empirical(const Eigen::Ref<const Vector>& frame, const Eigen::Ref<const Vector>& delayed,
                    const MgParams& p) {
  if (frame.size() != delayed.size()) throw PreconditionError("mg_empirical frame/delayed size mismatch");
  Vector inc(frame.size());
  for (Index j = 0; j < frame.size(); ++j) inc[j] = p.dt * mg_rhs(frame[j], delayed[j], p, p.epsilon);
  return inc;
}

// --- Kuramoto-Sivashinsky ------------------------------------------------

Vector ks_rhs(const Eigen::Ref<const Vector>& u, const KsParams& p, double second_derivative_scale) {
  const Index n = u.size();
  if (n != p.grid_points) {
    throw PreconditionError(fmt::format("KS state has {} points, expected {}", n, p.grid_points));
  }
  const double h = p.dx();
  const double c4 = p.viscosity / (h * h * h * h);
  const double c2 = second_derivative_scale / (h * h);
  const double c1 = 1.0 / (4.0 * h);
  // Ghost nodes from u_x = 0 at both ends.
  auto at = [&](Index i) {
    if (i < 0) return u[-i];
    if (i >= n) return u[2 * (n - 1) - i];
    return u[i];
  };
  Vector du = Vector::Zero(n);
  for (Index i = 1; i + 1 < n; ++i) {
    const double um2 = at(i - 2), um1 = u[i - 1], ui = u[i], up1 = u[i + 1], up2 = at(i + 2);
    du[i] = -c4 * (um2 - 4.0 * um1 + 6.0 * ui - 4.0 * up1 + up2) - c2 * (up1 - 2.0 * ui + um1) -
            c1 * (up1 * up1 - um1 * um1);
  }
  return du;
}

Vector ks_integrate(const Eigen::Ref<const Vector>& u0, const KsParams& p, bool use_epsilon, double h,
                    int n_inner) {
  const double scale = use_epsilon ? 1.0 + p.epsilon : 1.0;
  const Index last = u0.size() - 1;
  Vector u = u0;
  u[0] = 0.0;
  u[last] = 0.0;
  for (int s = 0; s < n_inner; ++s) {
    const Vector k1 = ks_rhs(u, p, scale);
    Vector stage = u + h * k1;
    stage[0] = 0.0;
    stage[last] = 0.0;
    const Vector k2 = ks_rhs(stage, p, scale);
    u += 0.5 * h * (k1 + k2);
    u[0] = 0.0;
    u[last] = 0.0;
    if (out_of_guard(u)) {
      throw BlowupError(fmt::format("KS integration blew up at inner step {}", s), s);
    }
  }
  return u;
}

Vector ks_step(const Eigen::Ref<const Vector>& u, const KsParams& p, bool use_epsilon) {
  return ks_integrate(u, p, use_epsilon, p.inner_dt(), p.inner_steps);
}

Vector ks_empirical(const Eigen::Ref<const Vector>& u, const KsParams& p) { return ks_step(u, p, true); }

Vector ks_initial_condition(const KsParams& p, std::uint64_t seed, const KsInitialCondition& ic) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coeff(-1.0, 1.0);
  Vector u = Vector::Zero(p.grid_points);
  const double h = p.dx();
  for (int k = 1; k <= ic.modes; ++k) {
    const double a = coeff(rng);
    for (Index i = 0; i < u.size(); ++i) {
      u[i] += ic.amplitude * a * std::sin(k * std::numbers::pi * (i * h) / p.domain_length);
    }
  }
  u[0] = 0.0;
  u[u.size() - 1] = 0.0;
  return u;
}

Trajectory ks_trajectory(const KsParams& p, Index n_steps, Index transient, std::uint64_t seed,
                         const KsInitialCondition& ic) {
  p.validate();
  if (n_steps < 1) throw PreconditionError("ks_trajectory needs n_steps >= 1");
  if (transient < 0) throw PreconditionError("ks_trajectory needs transient >= 0");

  Trajectory out;
  out.dt = p.dt;
  out.states.resize(n_steps, p.grid_points);
  Vector u = ks_initial_condition(p, seed, ic);
  const Index total = transient + n_steps;
  for (Index step = 0; step < total; ++step) {
    if (step > 0) {
      try {
        u = ks_step(u, p, false);
      } catch (const BlowupError& e) {
        throw BlowupError(fmt::format("KS integration blew up at sample step {} ({})", step, e.what()), step);
      }
    }
    if (step >= transient) out.states.row(step - transient) = u.transpose();
  }
  return out;
}

// --- CSV -----------------------------------------------------------------

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, Index first_step) {
  std::string line = "t";
  for (Index j = 0; j < traj.dim(); ++j) line += fmt::format(",x{}", j);
  os << line << '\n';
  for (Index r = 0; r < traj.rows(); ++r) {
    line = fmt::format("{:.17g}", static_cast<double>(first_step + r) * traj.dt);
    for (Index j = 0; j < traj.dim(); ++j) line += fmt::format(",{:.17g}", traj.states(r, j));
    os << line << '\n';
  }
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj, Index first_step) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(fmt::format("cannot open '{}' for writing", path));
  write_trajectory_csv(os, traj, first_step);
  if (!os) throw IoError(fmt::format("failed writing '{}'", path));
}

Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError(fmt::format("cannot open trajectory file '{}'", path));
  std::string header;
  if (!std::getline(is, header) || header.rfind("t", 0) != 0) {
    throw IoError(fmt::format("'{}' is missing the `t,x0,...` header", path));
  }
  const auto width = static_cast<Index>(std::count(header.begin(), header.end(), ','));
  if (width < 1) throw IoError(fmt::format("'{}' has no state columns", path));

  std::vector<double> times;
  std::vector<double> values;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    Index col = 0;
    while (std::getline(fields, cell, ',')) {
      double v = 0.0;
      try {
        v = std::stod(cell);
      } catch (const std::exception&) {
        throw IoError(fmt::format("'{}' line {}: bad number '{}'", path, lineno, cell));
      }
      (col == 0 ? times : values).push_back(v);
      ++col;
    }
    if (col != width + 1) {
      throw IoError(fmt::format("'{}' line {}: expected {} columns, got {}", path, lineno, width + 1, col));
    }
  }
  Trajectory out;
  out.states = Eigen::Map<RowMatrix>(values.data(), static_cast<Index>(times.size()), width);
  out.dt = times.size() >= 2 ? times[1] - times[0] : 0.0;
  return out;
}

}  // namespace hlstm
