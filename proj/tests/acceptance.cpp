// Acceptance suite: one pass/fail line per criterion.
//
//   hlstm_acceptance                 run every criterion
//   hlstm_acceptance --criterion 5   run one

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gradcheck.hpp"
#include "hlstm/checkpoint.hpp"
#include "hlstm/commands.hpp"
#include "hlstm/config.hpp"
#include "hlstm/dynamics.hpp"
#include "hlstm/eval.hpp"
#include "hlstm/pipeline.hpp"
#include "oracles.hpp"

using namespace hlstm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string preset_path(const std::string& name) {
  return (fs::path(HLSTM_SOURCE_DIR) / "presets" / name).string();
}

// --- 1 -------------------------------------------------------------------

Outcome gradient_exactness() {
  double worst = 0.0;
  Index params = 0;
  const int n_cases = 8;
  for (std::uint64_t seed = 1; seed <= n_cases; ++seed) {
    const auto r = gradcheck::run(gradcheck::make_case(seed), seed % 2 ? 0.0 : 0.01);
    worst = std::max(worst, r.max_rel_error);
    params += r.n_params;
  }
  return {worst < 1e-5, fmt::format("{} configs, {} parameters, max relative error {:.2e} (< 1e-5)", n_cases,
                                    params, worst)};
}

// --- 2 -------------------------------------------------------------------

Outcome integrator_order() {
  auto heun_error = [](double dt) {
    MgParams p;
    p.beta = 0.0;
    p.dt = dt;
    p.tau = dt;
    const Index steps = static_cast<Index>(std::lround(5.0 / dt));
    const auto traj = mg_trajectory(p, steps + 1, 0, 0, MgInitialHistory{1.0, 0.0});
    return std::abs(traj.states(steps, 0) - std::exp(-5.0));
  };
  const double heun_ratio = heun_error(0.1) / heun_error(0.05);

  KsParams kp;
  Vector bump = Vector::Zero(kp.grid_points);
  for (Index i = 0; i < bump.size(); ++i) {
    bump[i] = std::pow(std::sin(M_PI * static_cast<double>(i) * kp.dx() / kp.domain_length), 4);
  }
  const double h = kp.inner_dt();
  const Vector ref = ks_integrate(bump, kp, false, h / 4, 160);
  const Vector coarse = ks_integrate(bump, kp, false, h, 40);
  const Vector fine = ks_integrate(bump, kp, false, h / 2, 80);
  const double ks_ratio = (coarse - ref).norm() / (fine - ref).norm();
  // Against an h/4 reference the ratio is (1 - 1/4^p) / (1/2^p - 1/4^p); p = 2 gives 5.
  const double order = std::log2(ks_ratio - 1.0);
  const bool pass = heun_ratio >= 3.5 && heun_ratio <= 4.5 && std::abs(order - 2.0) < 0.2;
  return {pass, fmt::format("Heun error ratio {:.3f} (in [3.5, 4.5]); KS RK2 observed order {:.3f} (2 +/- 0.2)",
                            heun_ratio, order)};
}

// --- 3 -------------------------------------------------------------------

Outcome hybrid_representability() {
  ExperimentConfig cfg = ks_preset();
  cfg.ks.epsilon = 0.0;
  cfg.n_steps = 2000;
  const Trajectory truth = generate_trajectory(cfg);
  const Trajectory train_span{truth.states.topRows(1600), truth.dt};

  ModelSpec spec = model_spec(cfg, true);
  TrainConfig tc = cfg.train;
  tc.n_layers = 1;
  tc.hidden_dim = 4;
  HybridForecaster f = build_forecaster(train_span, tc, spec);
  f.params.readout().W_hy.setZero();
  f.params.readout().b_y.setZero();
  f.params.readout().W_ey.setIdentity();

  const double scale = error_scale(train_span);
  const Index horizon = 160;  // 40 MT
  double shortest = 1e9;
  for (const Index start : {1600, 1650, 1700, 1750, 1800}) {
    const auto p = predict_closed_loop(f, truth.states.middleRows(start - f.context_len(), f.context_len()), horizon);
    std::vector<double> err;
    for (Index k = 0; k < p.frames.rows(); ++k) {
      err.push_back(normalized_error(truth.states.row(start + k).transpose(), p.frames.states.row(k).transpose(),
                                     scale));
    }
    err.resize(static_cast<std::size_t>(horizon), std::numeric_limits<double>::infinity());
    shortest = std::min(shortest, valid_time(err, 0.1, cfg.dt()).t);
  }
  return {shortest >= 20.0,
          fmt::format("shortest valid time over 5 starts {:.2f} MT at f = 0.1 (>= 20 MT; horizon 40 MT)", shortest)};
}

// --- 4 -------------------------------------------------------------------

Outcome metric_identities() {
  std::mt19937_64 rng(4);
  int failures = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const RowMatrix t = oracle::random_rows(7, 5, rng);
    const RowMatrix q = oracle::random_rows(7, 5, rng);
    const Vector xbar = oracle::random_rows(1, 5, rng).row(0).transpose();
    const RowMatrix reflected = (-t).rowwise() + 2.0 * xbar.transpose();
    if (std::abs(*acc_at(t, t, xbar) - 1.0) > 1e-12) ++failures;
    if (std::abs(*acc_at(t, reflected, xbar) + 1.0) > 1e-12) ++failures;
    if (rmse_at(t, t) != 0.0) ++failures;
    if (!(rmse_at(t, q) > 0.0)) ++failures;
    RowMatrix nudged = t;
    nudged(trial % 7, trial % 5) += 1e-9;
    if (!(rmse_at(t, nudged) > 0.0)) ++failures;

    std::vector<double> err(60);
    double acc = 0.0;
    std::uniform_real_distribution<double> u(-0.01, 0.03);
    for (auto& e : err) e = std::abs(acc += u(rng));
    double prev = -1.0;
    for (double f = 0.05; f < 1.0; f += 0.05) {
      const double tv = valid_time(err, f, 0.1).t;
      if (tv < prev) ++failures;
      prev = tv;
    }
  }
  return {failures == 0, fmt::format("200 random trials, {} identity violations", failures)};
}

// --- 5 / 6 ---------------------------------------------------------------

struct SeedMedians {
  std::vector<std::vector<double>> per_variant;  // [variant][seed]
};

SeedMedians desk_runs(const ExperimentConfig& base, const std::vector<VariantSpec>& variants,
                      const std::vector<std::uint64_t>& seeds) {
  SeedMedians out;
  out.per_variant.assign(variants.size(), {});
  for (const auto seed : seeds) {
    ExperimentConfig cfg = base;
    cfg.seed = seed;
    cfg.train.seed = seed;
    const Trajectory data = to_model_space(cfg, generate_trajectory(cfg));
    const auto r = run_comparison(data, variants, ComparisonSetup{cfg.train, model_spec(cfg, true)}, cfg.eval, seed);
    std::string line = fmt::format("    seed {}:", seed);
    for (std::size_t v = 0; v < variants.size(); ++v) {
      out.per_variant[v].push_back(r.series[v].median_valid_time());
      line += fmt::format(" {}={:.2f}", variants[v].name, r.series[v].median_valid_time());
    }
    std::cout << line << " MT" << std::endl;
  }
  return out;
}

Outcome mg_ordering() {
  const ExperimentConfig cfg = load_config(preset_path("mg_desk.yaml"));
  const auto variants = standard_variants(cfg.train.n_layers);
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  const auto runs = desk_runs(cfg, variants, seeds);
  std::vector<double> med;
  for (const auto& v : runs.per_variant) med.push_back(median(v));
  int inversions = 0;
  for (std::size_t i = 0; i + 1 < med.size(); ++i) inversions += med[i] > med[i + 1] ? 1 : 0;
  const double ratio = med[3] / med[1];
  const bool pass = ratio >= 1.5 && inversions <= 1;
  return {pass, fmt::format("median over {} seeds: single {:.2f}, multi {:.2f}, hybrid_single {:.2f}, "
                            "hybrid_multi {:.2f} MT; hybrid_multi/multi = {:.2f} (>= 1.5); "
                            "adjacent inversions {} (<= 1)",
                            seeds.size(), med[0], med[1], med[2], med[3], ratio, inversions)};
}

Outcome ks_gain() {
  const ExperimentConfig cfg = load_config(preset_path("ks_desk.yaml"));
  const std::vector<VariantSpec> variants{parse_variant("multi", cfg.train.n_layers),
                                          parse_variant("hybrid_multi", cfg.train.n_layers)};
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const auto runs = desk_runs(cfg, variants, seeds);
  const double multi = median(runs.per_variant[0]);
  const double hybrid = median(runs.per_variant[1]);
  const double ratio = hybrid / multi;
  return {ratio >= 1.5, fmt::format("median over {} seeds: multi {:.2f} MT, hybrid_multi {:.2f} MT; ratio {:.2f} "
                                    "(>= 1.5)",
                                    seeds.size(), multi, hybrid, ratio)};
}

// --- 7 -------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::pair<std::string, std::string>> pipeline_outputs(const ExperimentConfig& cfg, const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto p = [&](const std::string& f) { return (dir / f).string(); };
  cmd_generate(cfg, p("data.csv"), false);
  cmd_train(cfg, p("data.csv"), p("model.json"), false);
  const Checkpoint ck = read_checkpoint(p("model.json"));
  const Index span = cfg.system == SystemKind::mackey_glass ? cfg.embed_dim - 1 : 0;
  cmd_predict(p("model.json"), p("data.csv"), ck.forecaster.context_len() + span + 5, 25, p("pred.csv"), false);
  cmd_evaluate(cfg, p("data.csv"), {"single", "hybrid_multi", "oracle"}, p("eval"), false);

  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.emplace_back(fs::relative(e.path(), dir).string(), slurp(e.path()));
  }
  std::sort(files.begin(), files.end());
  return files;
}

Outcome determinism() {
  ExperimentConfig mg = mg_preset();
  mg.n_steps = 900;
  mg.transient = 200;
  mg.train.n_layers = 2;
  mg.train.hidden_dim = 6;
  mg.train.epochs = 2;
  mg.eval.v_starts = 5;
  mg.eval.max_horizon = 40;
  ExperimentConfig ks = ks_preset();
  ks.n_steps = 300;
  ks.transient = 100;
  ks.train.n_layers = 2;
  ks.train.hidden_dim = 5;
  ks.train.window_len = 6;
  ks.train.batch_size = 16;
  ks.train.epochs = 2;
  ks.eval.v_starts = 4;
  ks.eval.max_horizon = 20;

  const fs::path root = fs::temp_directory_path() / "hlstm_acceptance_determinism";
  std::size_t compared = 0;
  std::vector<std::string> differing;
  for (const auto& [name, cfg] : {std::pair{"mg", mg}, std::pair{"ks", ks}}) {
    const auto a = pipeline_outputs(cfg, root / (std::string(name) + "_a"));
    const auto b = pipeline_outputs(cfg, root / (std::string(name) + "_b"));
    if (a.size() != b.size()) differing.push_back(std::string(name) + ": file sets differ");
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
      ++compared;
      if (a[i] != b[i]) differing.push_back(std::string(name) + "/" + a[i].first);
    }
  }
  fs::remove_all(root);
  std::string detail = fmt::format("{} output files compared byte for byte", compared);
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty() && compared > 0, detail};
}

// --- 8 -------------------------------------------------------------------

Outcome windowing_oracles() {
  std::mt19937_64 rng(8);
  int failures = 0;
  double worst_roundtrip = 0.0;

  for (int trial = 0; trial < 20; ++trial) {
    Trajectory t;
    t.dt = 0.1;
    t.states = oracle::random_rows(30 + trial, 1 + trial % 5, rng, 1.0 + trial);
    t.states.col(0).array() += 10.0 * trial;
    const NormStats s = fit_norm(t);
    const RowMatrix back = s.denormalize_rows(s.normalize_rows(t.states));
    const double rel = ((back - t.states).cwiseAbs().array() / t.states.cwiseAbs().array().max(1.0)).maxCoeff();
    worst_roundtrip = std::max(worst_roundtrip, rel);
  }
  if (worst_roundtrip > 1e-12) ++failures;

  // Window counts N - d for plain and KS-hybrid models (no lookback).
  KsParams kp;
  kp.domain_length = 8.0;
  kp.grid_points = 9;
  kp.dt = 0.01;
  kp.inner_steps = 10;
  for (const Index n : {6, 11, 40}) {
    for (const int d : {1, 3, 5}) {
      Trajectory t;
      t.dt = kp.dt;
      t.states = oracle::random_rows(n, 9, rng, 0.3);
      t.states.col(0).setZero();
      t.states.col(8).setZero();
      TrainConfig tc;
      tc.window_len = d;
      tc.hidden_dim = 2;
      tc.n_layers = 1;
      tc.epochs = 0;
      ModelSpec plain;
      ModelSpec hybrid;
      hybrid.hybrid = true;
      hybrid.empirical = KsEmpirical{kp};
      for (const auto& spec : {plain, hybrid}) {
        HybridForecaster f = build_forecaster(t, tc, spec);
        const SampleSet s = make_windows(t, f);
        if (s.count() != n - d) ++failures;
        // Brute-force splice: normalized row, then normalized empirical step of the raw row.
        for (Index r = 0; r < n; ++r) {
          Vector expect(spec.hybrid ? 18 : 9);
          for (Index j = 0; j < 9; ++j) expect[j] = (t.states(r, j) - f.state_norm.mean[j]) / f.state_norm.std[j];
          if (spec.hybrid) {
            const Vector e = ks_step(t.states.row(r).transpose(), kp, true);
            for (Index j = 0; j < 9; ++j) expect[9 + j] = (e[j] - f.target_norm.mean[j]) / f.target_norm.std[j];
          }
          if ((s.frames.row(r).transpose() - expect).cwiseAbs().maxCoeff() > 1e-12) ++failures;
        }
        // Labels follow each window.
        for (Index i = 0; i < s.count(); ++i) {
          const Vector y = f.target_norm.denormalize(s.labels.row(i).transpose());
          if ((y - t.states.row(i + d).transpose()).cwiseAbs().maxCoeff() > 1e-12) ++failures;
        }
      }
    }
  }
  return {failures == 0, fmt::format("round-trip max relative error {:.1e} (<= 1e-12); {} count/layout violations",
                                     worst_roundtrip, failures)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion (1-8)")->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all{
      {1, "gradient exactness", 60, gradient_exactness},
      {2, "integrator order", 60, integrator_order},
      {3, "hybrid representability", 120, hybrid_representability},
      {4, "metric identities", 10, metric_identities},
      {5, "MG ordering at desk scale", 1200, mg_ordering},
      {6, "KS hybrid gain at desk scale", 1800, ks_gain},
      {7, "determinism", 300, determinism},
      {8, "normalization and windowing oracles", 60, windowing_oracles},
  };

  bool all_pass = true;
  for (const auto& c : all) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    all_pass = all_pass && pass;
    std::cout << fmt::format("criterion {} [{}]: {} | {} | {:.1f} s (budget {:.0f} s)", c.id, c.name,
                             pass ? "PASS" : "FAIL", o.detail, secs, c.budget_s)
              << std::endl;
  }
  return all_pass ? 0 : 1;
}
