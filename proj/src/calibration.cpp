#include "agla/calibration.hpp"

#include <fstream>

#include "agla/errors.hpp"

namespace agla {

namespace {

template <typename T>
void read_into(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config key '") + key + "': " + e.what());
  }
}

Sampler sampler_from_json(const nlohmann::json& j) {
  Sampler s;
  std::string kind = "multinomial";
  read_into(j, "kind", kind);
  using K = Sampler::Kind;
  if (kind == "greedy") s.kind = K::greedy;
  else if (kind == "multinomial") s.kind = K::multinomial;
  else if (kind == "top_p") s.kind = K::top_p;
  else if (kind == "top_k") s.kind = K::top_k;
  else if (kind == "temperature") s.kind = K::temperature;
  else if (kind == "top_p_temperature") s.kind = K::top_p_temperature;
  else if (kind == "top_k_temperature") s.kind = K::top_k_temperature;
  else throw InputError("unknown sampler kind '" + kind + "'");
  read_into(j, "p", s.p);
  read_into(j, "k", s.k);
  read_into(j, "t", s.t);
  return s;
}

std::string sampler_kind_name(Sampler::Kind k) {
  using K = Sampler::Kind;
  switch (k) {
    case K::greedy: return "greedy";
    case K::multinomial: return "multinomial";
    case K::top_p: return "top_p";
    case K::top_k: return "top_k";
    case K::temperature: return "temperature";
    case K::top_p_temperature: return "top_p_temperature";
    case K::top_k_temperature: return "top_k_temperature";
  }
  throw ContractViolation("invalid sampler kind");
}

}  // namespace

nlohmann::json world_config_to_json(const toy::WorldConfig& c) {
  const auto& f = c.featurizer;
  const auto& m = c.matching;
  const auto& t = c.toy;
  return {{"seed", c.seed},
          {"featurizer",
           {{"patch_size", f.patch_size},
            {"feature_dim", f.feature_dim},
            {"dc_weight", f.dc_weight},
            {"background", f.background},
            {"pattern_base", f.pattern_base},
            {"pattern_amplitude", f.pattern_amplitude},
            {"noise_amplitude", f.noise_amplitude}}},
          {"matching",
           {{"heads", m.heads},
            {"attention_gain", m.attention_gain},
            {"head_jitter", m.head_jitter},
            {"readout_gain", m.readout_gain},
            {"target_sim", m.target_sim}}},
          {"toy",
           {{"gamma", t.gamma},
            {"lambda", t.lambda},
            {"kappa", t.kappa},
            {"tau", t.tau},
            {"tau_gen", t.tau_gen},
            {"floor_logit", t.floor_logit}}}};
}

toy::WorldConfig world_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("world config must be a JSON object");
  toy::WorldConfig c;
  read_into(j, "seed", c.seed);
  if (j.contains("featurizer")) {
    const auto& f = j["featurizer"];
    read_into(f, "patch_size", c.featurizer.patch_size);
    read_into(f, "feature_dim", c.featurizer.feature_dim);
    read_into(f, "dc_weight", c.featurizer.dc_weight);
    read_into(f, "background", c.featurizer.background);
    read_into(f, "pattern_base", c.featurizer.pattern_base);
    read_into(f, "pattern_amplitude", c.featurizer.pattern_amplitude);
    read_into(f, "noise_amplitude", c.featurizer.noise_amplitude);
  }
  if (j.contains("matching")) {
    const auto& m = j["matching"];
    read_into(m, "heads", c.matching.heads);
    read_into(m, "attention_gain", c.matching.attention_gain);
    read_into(m, "head_jitter", c.matching.head_jitter);
    read_into(m, "readout_gain", c.matching.readout_gain);
    read_into(m, "target_sim", c.matching.target_sim);
  }
  if (j.contains("toy")) {
    const auto& t = j["toy"];
    read_into(t, "gamma", c.toy.gamma);
    read_into(t, "lambda", c.toy.lambda);
    read_into(t, "kappa", c.toy.kappa);
    read_into(t, "tau", c.toy.tau);
    read_into(t, "tau_gen", c.toy.tau_gen);
    read_into(t, "floor_logit", c.toy.floor_logit);
  }
  return c;
}

nlohmann::json bench_config_to_json(const BenchConfig& c) {
  const Sampler& s = c.decoder.sampler;
  return {{"kind", std::string(toy::to_string(c.kind))},
          {"n", c.n},
          {"seed", c.seed},
          {"strategy", std::string(to_string(c.strategy))},
          {"alpha", c.decoder.alpha},
          {"beta", c.decoder.beta},
          {"max_len", c.decoder.max_len},
          {"sampler", {{"kind", sampler_kind_name(s.kind)}, {"p", s.p}, {"k", s.k}, {"t", s.t}}}};
}

BenchConfig bench_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("bench config must be a JSON object");
  BenchConfig c;
  std::string kind(toy::to_string(c.kind));
  read_into(j, "kind", kind);
  c.kind = toy::parse_benchmark_kind(kind);
  read_into(j, "n", c.n);
  read_into(j, "seed", c.seed);
  std::string strategy(to_string(c.strategy));
  read_into(j, "strategy", strategy);
  try {
    c.strategy = parse_mask_strategy(strategy);
  } catch (const ContractViolation& e) {
    throw InputError(e.what());
  }
  read_into(j, "alpha", c.decoder.alpha);
  read_into(j, "beta", c.decoder.beta);
  read_into(j, "max_len", c.decoder.max_len);
  if (j.contains("sampler")) c.decoder.sampler = sampler_from_json(j["sampler"]);
  c.decoder.seed = c.seed;
  return c;
}

nlohmann::json calibration_to_json(const Calibration& c) {
  return {{"world", world_config_to_json(c.world)},
          {"benchmark", bench_config_to_json(c.bench)},
          {"expected", c.expected}};
}

Calibration calibration_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("world") || !j.contains("benchmark"))
    throw InputError("calibration file needs 'world' and 'benchmark' objects");
  Calibration c;
  c.world = world_config_from_json(j["world"]);
  c.bench = bench_config_from_json(j["benchmark"]);
  c.expected = j.value("expected", nlohmann::json::object());
  return c;
}

Calibration load_calibration(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return calibration_from_json(j);
}

}  // namespace agla
