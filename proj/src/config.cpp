#include "uhlm/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "uhlm/error.hpp"
#include "uhlm/random_stream.hpp"

namespace uhlm {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw config_error(where + " must be a table");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [k, v] : obj.items()) {
    if (!keys.count(k)) throw config_error("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& dst, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error(where + "." + key + " has the wrong type");
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, std::optional<T>& dst,
              const std::string& where) {
  if (!obj.contains(key)) return;
  T v{};
  read(obj, key, v, where);
  dst = v;
}

json toml_node(const toml::node& n, const std::string& source) {
  if (const auto* t = n.as_table()) {
    json obj = json::object();
    for (const auto& [k, v] : *t) obj[std::string(k.str())] = toml_node(v, source);
    return obj;
  }
  if (const auto* a = n.as_array()) {
    json arr = json::array();
    for (const auto& v : *a) arr.push_back(toml_node(v, source));
    return arr;
  }
  if (const auto* s = n.as_string()) return s->get();
  if (const auto* i = n.as_integer()) return i->get();
  if (const auto* f = n.as_floating_point()) return f->get();
  if (const auto* b = n.as_boolean()) return b->get();
  throw config_error(source + ": dates and times are not supported in run configs");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json channel_json(const EngineConfig& e) {
  const auto& c = e.channel;
  return {{"W_hz", c.W_hz},
          {"p_dbm", c.p_dbm},
          {"N_dbm", c.N_dbm},
          {"alpha", c.alpha},
          {"rho_m", c.rho_m},
          {"b_prob", c.b_prob},
          {"fading", c.fading == Fading::Rayleigh ? "rayleigh" : "none"},
          {"payload_vocab_size",
           e.payload_vocab_size ? json(*e.payload_vocab_size) : json(nullptr)},
          {"sync_bits", e.sync_bits}};
}

}  // namespace

std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::Synthetic: return "synthetic";
    case BackendKind::NGram: return "ngram";
    case BackendKind::External: return "external";
  }
  return "unknown";
}

BackendKind backend_kind_from_string(std::string_view s) {
  if (s == "synthetic") return BackendKind::Synthetic;
  if (s == "ngram") return BackendKind::NGram;
  if (s == "external") return BackendKind::External;
  throw config_error("unknown backend '" + std::string(s) +
                     "' (expected synthetic, ngram or external)");
}

std::vector<std::uint64_t> RunConfigFile::run_seeds() const {
  return seeds.empty() ? std::vector<std::uint64_t>{engine.seed} : seeds;
}

void RunConfigFile::validate() const {
  engine.validate();
  if (calibration_rounds == 0) throw config_error("calibration_rounds must be positive");
  if (out_dir.empty()) throw config_error("output directory must not be empty");
  switch (backend.kind) {
    case BackendKind::Synthetic: backend.synthetic.validate(); break;
    case BackendKind::NGram:
      backend.ngram.validate();
      if (backend.ngram.corpus_path.empty()) throw config_error("ngram backend needs a corpus");
      if (!engine.prompt.empty() && prompt_len != 0) {
        throw config_error("run.prompt and run.prompt_len are mutually exclusive");
      }
      break;
    case BackendKind::External:
      if (backend.external.command.empty() == backend.external.address.empty()) {
        throw config_error("external backend needs exactly one of command or address");
      }
      if (engine.prompt.empty()) {
        throw config_error("external backend needs a non-empty run.prompt");
      }
      break;
  }
  for (double r : sweep.rho_m) {
    if (!(r > 0.0)) throw config_error("sweep rho_m values must be positive");
  }
}

json toml_to_json(const std::string& toml_text, const std::string& source) {
  try {
    const toml::table tbl = toml::parse(toml_text, std::string_view(source));
    return toml_node(tbl, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ": " << e.description() << " at line " << e.source().begin.line;
    throw config_error(os.str());
  }
}

json read_config_document(const std::string& path) {
  const std::string text = read_file(path);
  const bool is_json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  if (is_json) {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw config_error(path + ": " + e.what());
    }
  }
  return toml_to_json(text, path);
}

RunConfigFile parse_run_config(const json& doc) {
  reject_unknown(doc, "config", {"run", "backend", "channel", "latency", "perturbation", "sweep"});
  RunConfigFile cfg;
  EngineConfig& e = cfg.engine;

  if (doc.contains("run")) {
    const json& r = doc.at("run");
    const std::string w = "run";
    reject_unknown(r, w,
                   {"method", "seed", "seeds", "rounds", "oracle", "u_th", "threshold",
                    "rand_skip_prob", "calibration", "out", "stop_on_eos",
                    "calibration_rounds", "prompt", "prompt_len", "jobs",
                    "measure_uncertainty"});
    std::string method = std::string(to_string(e.method));
    read(r, "method", method, w);
    e.method = method_from_string(method);
    read(r, "seed", e.seed, w);
    read(r, "seeds", cfg.seeds, w);
    read(r, "rounds", e.r_max, w);
    read(r, "oracle", e.oracle_mode, w);
    read_opt(r, "u_th", cfg.u_th, w);
    if (r.contains("threshold")) {
      std::string t;
      read(r, "threshold", t, w);
      if (t == "prone") {
        cfg.threshold = ThresholdChoice::Prone;
      } else if (t == "averse") {
        cfg.threshold = ThresholdChoice::Averse;
      } else {
        throw config_error("run.threshold must be \"prone\" or \"averse\"");
      }
    }
    if (r.contains("rand_skip_prob")) {
      if (r.at("rand_skip_prob").is_string()) {
        if (r.at("rand_skip_prob").get<std::string>() != "matched") {
          throw config_error("run.rand_skip_prob must be a number or \"matched\"");
        }
        cfg.rand_skip_matched = true;
      } else {
        read(r, "rand_skip_prob", e.rand_skip_prob, w);
      }
    }
    read_opt(r, "calibration", cfg.calibration_path, w);
    read(r, "out", cfg.out_dir, w);
    read(r, "stop_on_eos", e.stop_on_eos, w);
    read(r, "calibration_rounds", cfg.calibration_rounds, w);
    std::vector<std::uint32_t> prompt;
    read(r, "prompt", prompt, w);
    for (std::uint32_t t : prompt) e.prompt.push_back(TokenId{t});
    read(r, "prompt_len", cfg.prompt_len, w);
    read(r, "jobs", cfg.jobs, w);
    read(r, "measure_uncertainty", e.always_measure_uncertainty, w);
  }

  if (doc.contains("backend")) {
    const json& b = doc.at("backend");
    reject_unknown(b, "backend", {"kind", "synthetic", "ngram", "external"});
    std::string kind = "synthetic";
    read(b, "kind", kind, "backend");
    cfg.backend.kind = backend_kind_from_string(kind);
    if (b.contains("synthetic")) {
      const json& s = b.at("synthetic");
      const std::string w = "backend.synthetic";
      reject_unknown(s, w,
                     {"vocab_size", "dirichlet_alpha", "coupling", "planted_rejection_mean",
                      "plant", "plant_a", "plant_b", "planted_delta", "eos_at_round",
                      "seed"});
      auto& sc = cfg.backend.synthetic;
      read(s, "vocab_size", sc.vocab_size, w);
      read(s, "dirichlet_alpha", sc.dirichlet_alpha, w);
      read(s, "coupling", sc.coupling, w);
      read_opt(s, "planted_rejection_mean", sc.planted_rejection_mean, w);
      if (s.contains("plant")) {
        std::string plant;
        read(s, "plant", plant, w);
        if (plant == "coupled") {
          sc.plant = SyntheticPairConfig::Plant::Coupled;
        } else if (plant == "linear") {
          sc.plant = SyntheticPairConfig::Plant::Linear;
        } else {
          throw config_error("backend.synthetic.plant must be \"coupled\" or \"linear\"");
        }
      }
      read(s, "plant_a", sc.plant_a, w);
      read(s, "plant_b", sc.plant_b, w);
      read_opt(s, "planted_delta", sc.planted_delta, w);
      read_opt(s, "eos_at_round", sc.eos_at_round, w);
      read(s, "seed", sc.seed, w);
    }
    if (b.contains("ngram")) {
      const json& n = b.at("ngram");
      const std::string w = "backend.ngram";
      reject_unknown(n, w, {"corpus", "order_slm", "order_llm", "epsilon", "eos_id"});
      auto& nc = cfg.backend.ngram;
      read(n, "corpus", nc.corpus_path, w);
      read(n, "order_slm", nc.order_slm, w);
      read(n, "order_llm", nc.order_llm, w);
      read(n, "epsilon", nc.smoothing_epsilon, w);
      read(n, "eos_id", nc.eos_id, w);
    }
    if (b.contains("external")) {
      const json& x = b.at("external");
      const std::string w = "backend.external";
      reject_unknown(x, w, {"command", "address", "timeout_s"});
      auto& xc = cfg.backend.external;
      read(x, "command", xc.command, w);
      read(x, "address", xc.address, w);
      double timeout_s = 60.0;
      read(x, "timeout_s", timeout_s, w);
      if (!(timeout_s > 0.0)) throw config_error("backend.external.timeout_s must be positive");
      xc.timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000.0));
    }
  }

  if (doc.contains("channel")) {
    const json& c = doc.at("channel");
    const std::string w = "channel";
    reject_unknown(c, w,
                   {"W_hz", "p_dbm", "N_dbm", "alpha", "rho_m", "b_prob", "fading",
                    "payload_vocab_size", "sync_bits"});
    read(c, "W_hz", e.channel.W_hz, w);
    read(c, "p_dbm", e.channel.p_dbm, w);
    read(c, "N_dbm", e.channel.N_dbm, w);
    read(c, "alpha", e.channel.alpha, w);
    read(c, "rho_m", e.channel.rho_m, w);
    read(c, "b_prob", e.channel.b_prob, w);
    if (c.contains("fading")) {
      std::string f;
      read(c, "fading", f, w);
      if (f == "rayleigh") {
        e.channel.fading = Fading::Rayleigh;
      } else if (f == "none") {
        e.channel.fading = Fading::None;
      } else {
        throw config_error("channel.fading must be \"rayleigh\" or \"none\"");
      }
    }
    if (c.contains("payload_vocab_size") && !c.at("payload_vocab_size").is_null()) {
      read_opt(c, "payload_vocab_size", e.payload_vocab_size, w);
    }
    read(c, "sync_bits", e.sync_bits, w);
  }

  if (doc.contains("latency")) {
    const json& l = doc.at("latency");
    reject_unknown(l, "latency", {"tau_slm_s", "tau_llm_s", "perturbation_cost"});
    read(l, "tau_slm_s", e.latency.tau_slm_s, "latency");
    read(l, "tau_llm_s", e.latency.tau_llm_s, "latency");
    read(l, "perturbation_cost", e.latency.perturbation_cost, "latency");
  }

  if (doc.contains("perturbation")) {
    const json& p = doc.at("perturbation");
    reject_unknown(p, "perturbation", {"K", "theta_min", "theta_max"});
    read(p, "K", e.perturbation.K, "perturbation");
    read(p, "theta_min", e.perturbation.theta_min, "perturbation");
    read(p, "theta_max", e.perturbation.theta_max, "perturbation");
  }
  cfg.backend.synthetic.perturbation = e.perturbation;

  if (doc.contains("sweep")) {
    const json& s = doc.at("sweep");
    reject_unknown(s, "sweep", {"methods", "u_th", "rho_m", "p_dbm"});
    std::vector<std::string> methods;
    read(s, "methods", methods, "sweep");
    for (const auto& m : methods) cfg.sweep.methods.push_back(method_from_string(m));
    read(s, "u_th", cfg.sweep.u_th, "sweep");
    read(s, "rho_m", cfg.sweep.rho_m, "sweep");
    read(s, "p_dbm", cfg.sweep.p_dbm, "sweep");
  }

  if (cfg.u_th) e.u_th = *cfg.u_th;
  cfg.validate();
  return cfg;
}

RunConfigFile load_run_config(const std::string& path) {
  return parse_run_config(read_config_document(path));
}

json resolved_json(const RunConfigFile& cfg) {
  const EngineConfig& e = cfg.engine;
  std::vector<std::uint32_t> prompt;
  for (TokenId t : e.prompt) prompt.push_back(t.index);
  json run = {
      {"method", std::string(to_string(e.method))},
      {"seed", e.seed},
      {"seeds", cfg.seeds},
      {"rounds", e.r_max},
      {"oracle", e.oracle_mode},
      {"u_th", cfg.u_th ? json(*cfg.u_th) : json(nullptr)},
      {"threshold", cfg.threshold == ThresholdChoice::Prone ? "prone" : "averse"},
      {"rand_skip_prob", cfg.rand_skip_matched ? json("matched") : json(e.rand_skip_prob)},
      {"calibration", cfg.calibration_path ? json(*cfg.calibration_path) : json(nullptr)},
      {"stop_on_eos", e.stop_on_eos},
      {"calibration_rounds", cfg.calibration_rounds},
      {"prompt", prompt},
      {"prompt_len", cfg.prompt_len},
      {"measure_uncertainty", e.always_measure_uncertainty},
  };

  json backend = {{"kind", std::string(to_string(cfg.backend.kind))}};
  switch (cfg.backend.kind) {
    case BackendKind::Synthetic: {
      const auto& s = cfg.backend.synthetic;
      backend["synthetic"] = {
          {"vocab_size", s.vocab_size},
          {"dirichlet_alpha", s.dirichlet_alpha},
          {"coupling", s.coupling},
          {"planted_rejection_mean",
           s.planted_rejection_mean ? json(*s.planted_rejection_mean) : json(nullptr)},
          {"plant", s.plant == SyntheticPairConfig::Plant::Linear ? "linear" : "coupled"},
          {"plant_a", s.plant_a},
          {"plant_b", s.plant_b},
          {"planted_delta", s.planted_delta ? json(*s.planted_delta) : json(nullptr)},
          {"eos_at_round", s.eos_at_round ? json(*s.eos_at_round) : json(nullptr)},
          {"seed", s.seed}};
      break;
    }
    case BackendKind::NGram: {
      const auto& n = cfg.backend.ngram;
      backend["ngram"] = {{"corpus", n.corpus_path},
                          {"order_slm", n.order_slm},
                          {"order_llm", n.order_llm},
                          {"epsilon", n.smoothing_epsilon},
                          {"eos_id", n.eos_id}};
      break;
    }
    case BackendKind::External: {
      const auto& x = cfg.backend.external;
      backend["external"] = {{"command", x.command},
                             {"address", x.address},
                             {"timeout_s", x.timeout.count() / 1000.0}};
      break;
    }
  }

  std::vector<std::string> methods;
  for (Method m : cfg.sweep.methods) methods.emplace_back(to_string(m));
  return {
      {"run", run},
      {"backend", backend},
      {"channel", channel_json(e)},
      {"latency",
       {{"tau_slm_s", e.latency.tau_slm_s},
        {"tau_llm_s", e.latency.tau_llm_s},
        {"perturbation_cost", e.latency.perturbation_cost}}},
      {"perturbation",
       {{"K", e.perturbation.K},
        {"theta_min", e.perturbation.theta_min},
        {"theta_max", e.perturbation.theta_max}}},
      {"sweep",
       {{"methods", methods},
        {"u_th", cfg.sweep.u_th},
        {"rho_m", cfg.sweep.rho_m},
        {"p_dbm", cfg.sweep.p_dbm}}},
  };
}

std::string config_hash(const RunConfigFile& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(resolved_json(cfg).dump())));
  return buf;
}

}  // namespace uhlm
