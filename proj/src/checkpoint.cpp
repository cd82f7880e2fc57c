#include "hlstm/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "hlstm/error.hpp"

namespace hlstm {

using nlohmann::json;

namespace {

json to_json_array(const Eigen::Ref<const Vector>& v) { return json(std::vector<double>(v.begin(), v.end())); }

Vector vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

json norm_to_json(const NormStats& s) { return {{"mean", to_json_array(s.mean)}, {"std", to_json_array(s.std)}}; }

NormStats norm_from(const json& j) { return {vector_from(j.at("mean")), vector_from(j.at("std"))}; }

json empirical_to_json(const std::optional<EmpiricalModel>& e) {
  if (!e) return nullptr;
  if (const auto* mg = std::get_if<MgEmpirical>(&*e)) {
    const MgParams& p = mg->params;
    return {{"kind", "mg"},   {"beta", p.beta}, {"gamma", p.gamma},     {"n_exp", p.n_exp},
            {"tau", p.tau},   {"dt", p.dt},     {"epsilon", p.epsilon}};
  }
  const KsParams& p = std::get<KsEmpirical>(*e).params;
  return {{"kind", "ks"},
          {"viscosity", p.viscosity},
          {"domain_length", p.domain_length},
          {"grid_points", p.grid_points},
          {"dt", p.dt},
          {"epsilon", p.epsilon},
          {"inner_steps", p.inner_steps}};
}

std::optional<EmpiricalModel> empirical_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "mg") {
    MgParams p;
    p.beta = j.at("beta").get<double>();
    p.gamma = j.at("gamma").get<double>();
    p.n_exp = j.at("n_exp").get<double>();
    p.tau = j.at("tau").get<double>();
    p.dt = j.at("dt").get<double>();
    p.epsilon = j.at("epsilon").get<double>();
    return MgEmpirical{p};
  }
  if (kind == "ks") {
    KsParams p;
    p.viscosity = j.at("viscosity").get<double>();
    p.domain_length = j.at("domain_length").get<double>();
    p.grid_points = j.at("grid_points").get<int>();
    p.dt = j.at("dt").get<double>();
    p.epsilon = j.at("epsilon").get<double>();
    p.inner_steps = j.at("inner_steps").get<int>();
    return KsEmpirical{p};
  }
  throw IoError(fmt::format("unknown empirical model kind '{}'", kind));
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const HybridForecaster& f = ckpt.forecaster;
  const NetConfig& cfg = f.config();
  json j;
  j["format"] = kCheckpointFormat;
  j["net"] = {{"n_layers", cfg.n_layers},     {"hidden_dim", cfg.hidden_dim}, {"input_dim", cfg.input_dim},
              {"window_len", cfg.window_len}, {"hybrid", cfg.hybrid},         {"empirical_dim", cfg.empirical_dim},
              {"residual_label", cfg.residual_label}};
  json tensors = json::array();
  for (std::size_t k = 0; k < f.params.slots().size(); ++k) {
    const TensorSlot& s = f.params.slots()[k];
    const auto t = f.params.tensor(k);
    tensors.push_back({{"name", s.name},
                       {"rows", s.rows},
                       {"cols", s.cols},
                       {"values", std::vector<double>(t.data(), t.data() + t.size())}});
  }
  j["tensors"] = std::move(tensors);
  j["state_norm"] = norm_to_json(f.state_norm);
  j["target_norm"] = norm_to_json(f.target_norm);
  j["empirical"] = empirical_to_json(f.empirical);
  j["delay_embedded"] = f.delay_embedded;
  j["data"] = {{"system", ckpt.system}, {"embed_dim", ckpt.embed_dim}, {"embed_lag", ckpt.embed_lag}, {"dt", ckpt.dt}};
  j["training"] = {{"epochs_done", ckpt.epochs_done},
                   {"eta", ckpt.schedule.eta},
                   {"gamma_decay", ckpt.schedule.gamma_decay}};
  j["adam"] = {{"step_count", ckpt.adam.step_count}, {"beta1", ckpt.adam.beta1},   {"beta2", ckpt.adam.beta2},
               {"eps_stab", ckpt.adam.eps_stab},     {"m1", to_json_array(ckpt.adam.m1)}, {"m2", to_json_array(ckpt.adam.m2)}};
  return j.dump(1) + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
  Checkpoint ckpt;
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kCheckpointFormat) {
      throw IoError(fmt::format("unsupported checkpoint format '{}'", j.at("format").get<std::string>()));
    }
    const json& n = j.at("net");
    NetConfig cfg;
    cfg.n_layers = n.at("n_layers").get<int>();
    cfg.hidden_dim = n.at("hidden_dim").get<int>();
    cfg.input_dim = n.at("input_dim").get<int>();
    cfg.window_len = n.at("window_len").get<int>();
    cfg.hybrid = n.at("hybrid").get<bool>();
    cfg.empirical_dim = n.at("empirical_dim").get<int>();
    cfg.residual_label = n.at("residual_label").get<bool>();

    HybridForecaster& f = ckpt.forecaster;
    f.params = LstmStackParams(cfg);
    const json& tensors = j.at("tensors");
    if (tensors.size() != f.params.slots().size()) throw IoError("checkpoint tensor count does not match the net");
    for (std::size_t k = 0; k < tensors.size(); ++k) {
      const TensorSlot& s = f.params.slots()[k];
      const json& t = tensors[k];
      const auto values = t.at("values").get<std::vector<double>>();
      if (t.at("name").get<std::string>() != s.name || t.at("rows").get<Index>() != s.rows ||
          t.at("cols").get<Index>() != s.cols || static_cast<Index>(values.size()) != s.size()) {
        throw IoError(fmt::format("checkpoint tensor {} does not match slot {} ({}x{})", k, s.name, s.rows, s.cols));
      }
      f.params.values().segment(s.offset, s.size()) =
          Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
    }
    f.state_norm = norm_from(j.at("state_norm"));
    f.target_norm = norm_from(j.at("target_norm"));
    f.empirical = empirical_from(j.at("empirical"));
    f.delay_embedded = j.at("delay_embedded").get<bool>();
    f.validate();

    const json& d = j.at("data");
    ckpt.system = d.at("system").get<std::string>();
    ckpt.embed_dim = d.at("embed_dim").get<int>();
    ckpt.embed_lag = d.at("embed_lag").get<int>();
    ckpt.dt = d.at("dt").get<double>();

    const json& tr = j.at("training");
    ckpt.epochs_done = tr.at("epochs_done").get<int>();
    ckpt.schedule.eta = tr.at("eta").get<double>();
    ckpt.schedule.gamma_decay = tr.at("gamma_decay").get<double>();

    const json& a = j.at("adam");
    ckpt.adam.step_count = a.at("step_count").get<long>();
    ckpt.adam.beta1 = a.at("beta1").get<double>();
    ckpt.adam.beta2 = a.at("beta2").get<double>();
    ckpt.adam.eps_stab = a.at("eps_stab").get<double>();
    ckpt.adam.m1 = vector_from(a.at("m1"));
    ckpt.adam.m2 = vector_from(a.at("m2"));
  } catch (const json::exception& e) {
    throw IoError(fmt::format("malformed checkpoint: {}", e.what()));
  }
  return ckpt;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(fmt::format("cannot open '{}' for writing", path));
  os << serialize_checkpoint(ckpt);
  if (!os) throw IoError(fmt::format("failed writing '{}'", path));
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError(fmt::format("cannot open checkpoint '{}'", path));
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace hlstm
