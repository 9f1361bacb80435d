#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "uhlm/calibration.hpp"
#include "uhlm/config.hpp"
#include "uhlm/engine.hpp"

namespace uhlm {

inline constexpr const char* kCodeVersion = "uhlm 0.1.0";

/// Builds backend pairs for runs of one config. Deterministic backends are
/// built once and shared between runs; the synthetic plant is reseeded per
/// run seed so that seeds see independent draft/target pairs.
class BackendFactory {
 public:
  explicit BackendFactory(BackendConfig cfg);

  BackendPair pair_for_seed(std::uint64_t run_seed) const;

  /// Prompt of `len` tokens: a corpus slice for the n-gram backend, empty
  /// otherwise.
  TokenSequence prompt_for_seed(std::uint64_t run_seed, std::size_t len) const;

 private:
  BackendConfig cfg_;
  std::vector<TokenId> corpus_;
  std::optional<BackendPair> shared_;
};

/// Seed mixing used for per-run and per-restart derived seeds.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt);

/// Engine config for one run seed: prompt drawn, seed set.
EngineConfig engine_for_seed(const RunConfigFile& cfg, const BackendFactory& factory,
                             std::uint64_t seed);

/// Transmitted-round samples from forced HLM generations. Generations that
/// stop early are restarted with derived seeds until `rounds` samples exist.
std::vector<CalibrationSample> collect_calibration_samples(const RunConfigFile& cfg,
                                                           const BackendFactory& factory,
                                                           std::size_t rounds);

struct CalibrateResult {
  CalibrationModel model;
  std::size_t samples = 0;
  std::string path;
};

/// Fits a calibration model and writes <out>/calibration.json.
CalibrateResult cmd_calibrate(const RunConfigFile& cfg);

/// UHLM threshold: explicit value, else the chosen calibrated threshold.
/// Throws "calibration required" when neither is available.
double resolve_u_th(const RunConfigFile& cfg);

/// Rand-HLM skip probability; "matched" runs a UHLM generation on the same
/// seed and uses its skip rate.
double resolve_rand_skip_prob(const RunConfigFile& cfg, const BackendFactory& factory,
                              const EngineConfig& ecfg);

struct RunRow {
  Method method = Method::UHLM;
  std::uint64_t seed = 0;
  double snr_mean_db = 0.0;
  std::optional<double> u_th;
  RunSummary summary;
};

struct RunResult {
  std::vector<RunRow> rows;
  std::vector<std::string> trace_paths;
  std::string summary_path;
};

/// Runs every seed. Each seed gets a trace and a JSON summary with every
/// metric; summary.csv holds one row per seed.
RunResult cmd_run(const RunConfigFile& cfg);

struct SweepRow {
  Method method = Method::UHLM;
  std::uint64_t seed = 0;
  double rho_m = 0.0;
  double p_dbm = 0.0;
  double snr_mean_db = 0.0;
  std::optional<double> u_th;
  std::optional<RunSummary> summary;
  std::string status = "ok";
  std::string error;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::string path;
};

/// Runs the cross product of sweep axes and seeds in parallel. The u_th
/// axis applies to UHLM cells only. Failed cells are kept with their error
/// while the rest continue.
SweepResult cmd_sweep(const RunConfigFile& cfg);

std::string summary_csv_header();
std::string summary_csv_row(const RunRow& row);
std::string sweep_csv_header();
std::string sweep_csv_row(const SweepRow& row);

}  // namespace uhlm
