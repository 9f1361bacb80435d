#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uhlm/engine.hpp"
#include "uhlm/external_backend.hpp"
#include "uhlm/ngram_backend.hpp"
#include "uhlm/synthetic_backend.hpp"

namespace uhlm {

enum class BackendKind { Synthetic, NGram, External };

std::string_view to_string(BackendKind k);
BackendKind backend_kind_from_string(std::string_view s);

struct BackendConfig {
  BackendKind kind = BackendKind::Synthetic;
  SyntheticPairConfig synthetic;
  NGramPairConfig ngram;
  ExternalEndpoint external;
};

/// Which calibrated threshold UHLM uses when u_th is not given explicitly.
enum class ThresholdChoice { Prone, Averse };

struct SweepAxes {
  std::vector<Method> methods;
  std::vector<double> u_th;
  std::vector<double> rho_m;
  std::vector<double> p_dbm;

  bool empty() const { return u_th.empty() && rho_m.empty() && p_dbm.empty(); }
};

/// Declarative run description: engine settings, backend, sweep axes and
/// output location. Built from TOML or JSON; unknown keys are rejected.
struct RunConfigFile {
  EngineConfig engine;
  std::optional<double> u_th;
  std::optional<std::string> calibration_path;
  ThresholdChoice threshold = ThresholdChoice::Prone;
  bool rand_skip_matched = false;
  std::vector<std::uint64_t> seeds;
  BackendConfig backend;
  std::size_t calibration_rounds = 10'000;
  std::size_t prompt_len = 0;
  std::string out_dir = "out";
  unsigned jobs = 0;
  SweepAxes sweep;

  /// Seeds to run: the explicit list, or the single engine seed.
  std::vector<std::uint64_t> run_seeds() const;

  void validate() const;
};

/// TOML document to the equivalent JSON value.
nlohmann::json toml_to_json(const std::string& toml_text, const std::string& source);

/// Reads a .toml or .json file into a JSON document.
nlohmann::json read_config_document(const std::string& path);

RunConfigFile parse_run_config(const nlohmann::json& doc);
RunConfigFile load_run_config(const std::string& path);

/// Fully resolved config, every default filled in. Output location and job
/// count are excluded so they do not change the config hash.
nlohmann::json resolved_json(const RunConfigFile& cfg);

/// 16-hex-digit hash of the resolved config.
std::string config_hash(const RunConfigFile& cfg);

}  // namespace uhlm
