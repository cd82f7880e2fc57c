#include "hlstm/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "hlstm/error.hpp"

namespace hlstm {

std::string to_string(SystemKind kind) {
  return kind == SystemKind::mackey_glass ? "mg" : "ks";
}

double ExperimentConfig::dt() const { return system == SystemKind::mackey_glass ? mg.dt : ks.dt; }

void ExperimentConfig::validate() const {
  if (n_steps < 1) throw ConfigError("data.n_steps must be >= 1");
  if (transient < 0) throw ConfigError("data.transient must be >= 0");
  if (system == SystemKind::mackey_glass) {
    mg.validate();
    if (embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
    if (embed_lag != 1) throw ConfigError("only lag-1 embeddings are supported for closed-loop prediction");
  } else {
    ks.validate();
  }
  train.validate();
  eval.validate();
}

namespace {

// Keys are checked so that typos fail loudly instead of silently falling
// back to defaults.
class Table {
 public:
  Table(const YAML::Node& node, std::string name) : node_(node), name_(std::move(name)) {
    if (node_ && !node_.IsMap()) throw ConfigError(fmt::format("[{}] must be a table", name_));
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!node_ || !node_[key]) return;
    try {
      out = node_[key].template as<T>();
    } catch (const YAML::Exception& e) {
      throw ConfigError(fmt::format("{}.{}: {}", name_, key, e.what()));
    }
  }

  void mark(const char* key) { seen_.insert(key); }

  void finish() const {
    if (!node_) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.contains(key)) throw ConfigError(fmt::format("unknown key {}.{}", name_, key));
    }
  }

 private:
  YAML::Node node_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(fmt::format("cannot parse config: {}", e.what()));
  }
  ExperimentConfig cfg;
  Table top(root, "config");
  std::string system = "mg";
  top.get("system", system);
  if (system == "mg") {
    cfg.system = SystemKind::mackey_glass;
  } else if (system == "ks") {
    cfg.system = SystemKind::kuramoto_sivashinsky;
  } else {
    throw ConfigError(fmt::format("system must be mg or ks, got '{}'", system));
  }
  top.get("seed", cfg.seed);
  // Section tables are consumed below.
  for (const char* k : {"data", "mackey_glass", "kuramoto_sivashinsky", "model", "train", "eval"}) top.mark(k);
  top.finish();

  Table data(root["data"], "data");
  data.get("n_steps", cfg.n_steps);
  data.get("transient", cfg.transient);
  data.finish();

  Table mg(root["mackey_glass"], "mackey_glass");
  mg.get("beta", cfg.mg.beta);
  mg.get("gamma", cfg.mg.gamma);
  mg.get("n_exp", cfg.mg.n_exp);
  mg.get("tau", cfg.mg.tau);
  mg.get("dt", cfg.mg.dt);
  mg.get("epsilon", cfg.mg.epsilon);
  mg.get("initial_value", cfg.mg_init.value);
  mg.get("initial_perturbation", cfg.mg_init.perturbation);
  mg.get("embed_dim", cfg.embed_dim);
  mg.get("embed_lag", cfg.embed_lag);
  mg.finish();

  Table ks(root["kuramoto_sivashinsky"], "kuramoto_sivashinsky");
  ks.get("viscosity", cfg.ks.viscosity);
  ks.get("domain_length", cfg.ks.domain_length);
  ks.get("grid_points", cfg.ks.grid_points);
  ks.get("dt", cfg.ks.dt);
  ks.get("epsilon", cfg.ks.epsilon);
  ks.get("inner_steps", cfg.ks.inner_steps);
  ks.get("initial_amplitude", cfg.ks_init.amplitude);
  ks.get("initial_modes", cfg.ks_init.modes);
  ks.finish();

  Table model(root["model"], "model");
  model.get("hybrid", cfg.hybrid);
  model.get("residual_label", cfg.residual_label);
  model.finish();

  Table train(root["train"], "train");
  std::string optimizer = "adam";
  train.get("optimizer", optimizer);
  if (optimizer == "adam") {
    cfg.train.optimizer = OptimizerKind::adam;
  } else if (optimizer == "sgd") {
    cfg.train.optimizer = OptimizerKind::sgd;
  } else {
    throw ConfigError(fmt::format("train.optimizer must be adam or sgd, got '{}'", optimizer));
  }
  train.get("batch_size", cfg.train.batch_size);
  train.get("window_len", cfg.train.window_len);
  train.get("hidden_dim", cfg.train.hidden_dim);
  train.get("n_layers", cfg.train.n_layers);
  train.get("epochs", cfg.train.epochs);
  train.get("eta", cfg.train.eta);
  train.get("gamma_decay", cfg.train.gamma_decay);
  train.get("lambda", cfg.train.lambda);
  train.get("clip_norm", cfg.train.clip_norm);
  train.get("beta1", cfg.train.beta1);
  train.get("beta2", cfg.train.beta2);
  train.get("eps_stab", cfg.train.eps_stab);
  train.finish();

  Table eval(root["eval"], "eval");
  eval.get("v_starts", cfg.eval.v_starts);
  eval.get("threshold", cfg.eval.threshold);
  eval.get("max_horizon", cfg.eval.max_horizon);
  eval.get("train_fraction", cfg.eval.train_fraction);
  eval.finish();

  cfg.train.seed = cfg.seed;
  cfg.eval.dt = cfg.dt();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError(fmt::format("cannot open config '{}'", path));
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "system" << YAML::Value << to_string(cfg.system);
  out << YAML::Key << "seed" << YAML::Value << cfg.seed;

  out << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "n_steps" << YAML::Value << cfg.n_steps;
  out << YAML::Key << "transient" << YAML::Value << cfg.transient;
  out << YAML::EndMap;

  out << YAML::Key << "mackey_glass" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "beta" << YAML::Value << cfg.mg.beta;
  out << YAML::Key << "gamma" << YAML::Value << cfg.mg.gamma;
  out << YAML::Key << "n_exp" << YAML::Value << cfg.mg.n_exp;
  out << YAML::Key << "tau" << YAML::Value << cfg.mg.tau;
  out << YAML::Key << "dt" << YAML::Value << cfg.mg.dt;
  out << YAML::Key << "epsilon" << YAML::Value << cfg.mg.epsilon;
  out << YAML::Key << "initial_value" << YAML::Value << cfg.mg_init.value;
  out << YAML::Key << "initial_perturbation" << YAML::Value << cfg.mg_init.perturbation;
  out << YAML::Key << "embed_dim" << YAML::Value << cfg.embed_dim;
  out << YAML::Key << "embed_lag" << YAML::Value << cfg.embed_lag;
  out << YAML::EndMap;

  out << YAML::Key << "kuramoto_sivashinsky" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "viscosity" << YAML::Value << cfg.ks.viscosity;
  out << YAML::Key << "domain_length" << YAML::Value << cfg.ks.domain_length;
  out << YAML::Key << "grid_points" << YAML::Value << cfg.ks.grid_points;
  out << YAML::Key << "dt" << YAML::Value << cfg.ks.dt;
  out << YAML::Key << "epsilon" << YAML::Value << cfg.ks.epsilon;
  out << YAML::Key << "inner_steps" << YAML::Value << cfg.ks.inner_steps;
  out << YAML::Key << "initial_amplitude" << YAML::Value << cfg.ks_init.amplitude;
  out << YAML::Key << "initial_modes" << YAML::Value << cfg.ks_init.modes;
  out << YAML::EndMap;

  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "hybrid" << YAML::Value << cfg.hybrid;
  out << YAML::Key << "residual_label" << YAML::Value << cfg.residual_label;
  out << YAML::EndMap;

  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "optimizer" << YAML::Value
      << (cfg.train.optimizer == OptimizerKind::adam ? "adam" : "sgd");
  out << YAML::Key << "batch_size" << YAML::Value << cfg.train.batch_size;
  out << YAML::Key << "window_len" << YAML::Value << cfg.train.window_len;
  out << YAML::Key << "hidden_dim" << YAML::Value << cfg.train.hidden_dim;
  out << YAML::Key << "n_layers" << YAML::Value << cfg.train.n_layers;
  out << YAML::Key << "epochs" << YAML::Value << cfg.train.epochs;
  out << YAML::Key << "eta" << YAML::Value << cfg.train.eta;
  out << YAML::Key << "gamma_decay" << YAML::Value << cfg.train.gamma_decay;
  out << YAML::Key << "lambda" << YAML::Value << cfg.train.lambda;
  out << YAML::Key << "clip_norm" << YAML::Value << cfg.train.clip_norm;
  out << YAML::Key << "beta1" << YAML::Value << cfg.train.beta1;
  out << YAML::Key << "beta2" << YAML::Value << cfg.train.beta2;
  out << YAML::Key << "eps_stab" << YAML::Value << cfg.train.eps_stab;
  out << YAML::EndMap;

  out << YAML::Key << "eval" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "v_starts" << YAML::Value << cfg.eval.v_starts;
  out << YAML::Key << "threshold" << YAML::Value << cfg.eval.threshold;
  out << YAML::Key << "max_horizon" << YAML::Value << cfg.eval.max_horizon;
  out << YAML::Key << "train_fraction" << YAML::Value << cfg.eval.train_fraction;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

ExperimentConfig mg_preset() {
  ExperimentConfig cfg;
  cfg.system = SystemKind::mackey_glass;
  cfg.n_steps = 10000;
  cfg.transient = 1000;
  cfg.mg = MgParams{2.0, 1.0, 9.65, 2.0, 0.1, 0.05};
  cfg.embed_dim = 8;
  cfg.embed_lag = 1;
  cfg.hybrid = true;
  cfg.residual_label = true;
  cfg.train.batch_size = 20;
  cfg.train.window_len = 21;
  cfg.train.hidden_dim = 40;
  cfg.train.n_layers = 5;
  cfg.train.epochs = 150;
  cfg.train.eta = 0.001;
  cfg.train.gamma_decay = 0.95;
  cfg.train.lambda = 5e-6;
  cfg.eval.v_starts = 100;
  cfg.eval.threshold = 0.1;
  cfg.eval.max_horizon = 1500;
  cfg.eval.dt = cfg.mg.dt;
  return cfg;
}

ExperimentConfig ks_preset() {
  ExperimentConfig cfg;
  cfg.system = SystemKind::kuramoto_sivashinsky;
  cfg.n_steps = 25000;
  cfg.transient = 1000;
  cfg.ks = KsParams{1.0, 35.0, 65, 0.25, 0.05, 200};
  cfg.hybrid = true;
  cfg.residual_label = false;
  cfg.train.batch_size = 100;
  cfg.train.window_len = 20;
  cfg.train.hidden_dim = 50;
  cfg.train.n_layers = 5;
  cfg.train.epochs = 150;
  cfg.train.eta = 0.001;
  cfg.train.gamma_decay = 0.98;
  cfg.train.lambda = 5e-10;
  cfg.eval.v_starts = 100;
  cfg.eval.threshold = 0.4;
  cfg.eval.max_horizon = 240;
  cfg.eval.dt = cfg.ks.dt;
  return cfg;
}

Trajectory to_model_space(const ExperimentConfig& cfg, const Trajectory& raw) {
  Trajectory out = cfg.system == SystemKind::mackey_glass ? mg_embed(raw, cfg.embed_dim, cfg.embed_lag) : raw;
  out.dt = cfg.dt();
  if (cfg.system == SystemKind::kuramoto_sivashinsky && out.dim() != cfg.ks.grid_points) {
    throw PreconditionError(
        fmt::format("data has {} columns but the KS grid has {} points", out.dim(), cfg.ks.grid_points));
  }
  return out;
}

Trajectory generate_trajectory(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.system == SystemKind::mackey_glass) {
    return mg_trajectory(cfg.mg, cfg.n_steps, cfg.transient, cfg.seed, cfg.mg_init);
  }
  return ks_trajectory(cfg.ks, cfg.n_steps, cfg.transient, cfg.seed, cfg.ks_init);
}

ModelSpec model_spec(const ExperimentConfig& cfg, bool hybrid) {
  ModelSpec spec;
  spec.hybrid = hybrid;
  spec.residual_label = cfg.residual_label;
  spec.delay_embedded = cfg.system == SystemKind::mackey_glass && cfg.embed_dim > 1;
  if (cfg.system == SystemKind::mackey_glass) {
    spec.empirical = MgEmpirical{cfg.mg};
  } else {
    spec.empirical = KsEmpirical{cfg.ks};
  }
  return spec;
}

}  // namespace hlstm
