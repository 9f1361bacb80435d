#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uhlm/backend.hpp"
#include "uhlm/channel.hpp"
#include "uhlm/uncertainty.hpp"
#include "uhlm/verifier.hpp"

namespace uhlm {

enum class Method { LLM, SLM, HLM, RandHLM, UHLM };

std::string_view to_string(Method m);
Method method_from_string(std::string_view s);

/// Per-token compute times. Defaults are the measured SLM/LLM wall times
/// of a 1.1B / 7B pair: 24.6 ms and 104.6 ms.
struct LatencyModel {
  double tau_slm_s = 0.0246;
  double tau_llm_s = 0.1046;
  /// Extra SLM time for the K perturbation passes, as a fraction of
  /// tau_slm_s. They run alongside the draft pass, so the default is 0.
  double perturbation_cost = 0.0;
};

struct EngineConfig {
  Method method = Method::UHLM;
  std::size_t r_max = 100;
  double u_th = 0.0;           // UHLM
  double rand_skip_prob = 0.5;  // RandHLM
  /// Compute the target distribution on skipped rounds for counterfactual
  /// metrics. Never affects control flow.
  bool oracle_mode = false;
  bool stop_on_eos = true;
  /// Measure u on every drafted round, not just where UHLM gates on it.
  bool always_measure_uncertainty = true;
  std::uint64_t seed = 0;

  ChannelParams channel;
  /// Vocabulary size used for payload sizing; defaults to the model's.
  std::optional<std::size_t> payload_vocab_size;
  /// Bits per skipped token added to the next uplink payload.
  std::uint64_t sync_bits = 0;
  LatencyModel latency;
  PerturbationConfig perturbation;
  TokenSequence prompt;

  void validate() const;
};

/// Verification outcome as recorded in traces (residual dropped).
struct RecordedOutcome {
  Decision decision = Decision::ImmediateAccept;
  TokenId response;
  double beta = 0.0;

  friend bool operator==(const RecordedOutcome&, const RecordedOutcome&) = default;
};

struct RoundRecord {
  std::size_t t = 0;
  std::optional<TokenId> draft;  // absent for LLM-only rounds
  std::optional<double> u;
  int delta = 0;
  std::optional<RecordedOutcome> outcome;                 // when delta == 1
  std::optional<RecordedOutcome> counterfactual_outcome;  // oracle, delta == 0
  std::optional<double> x_d;
  std::optional<double> y_d;
  double tau_uplink_s = 0.0;
  double round_time_s = 0.0;
  TokenId response;
  std::optional<double> snr_linear;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

struct RunSummary {
  std::size_t tokens_generated = 0;
  double total_time_s = 0.0;
  double throughput_tok_per_s = 0.0;
  double TR = 0.0;
  std::optional<double> TSR;
  std::optional<double> mean_beta;
  std::optional<double> mean_u;
  /// Counterfactual rejection probability summed over skipped rounds,
  /// divided by all rounds: the empirical counterpart of the expected
  /// rejection risk.
  std::optional<double> realized_risk;
  /// Mean counterfactual rejection probability of the skipped rounds alone.
  std::optional<double> mean_skipped_beta;
  /// Mean per-round total-variation distance between the method's response
  /// kernel and the lossless verification kernel for the round's draft.
  std::optional<double> fidelity_tv;
  double skip_rate = 0.0;
};

/// Per-round random streams, each labelled by consumer and round index.
struct RoundStreams {
  RandomStream draft;
  RandomStream perturbation;
  RandomStream gate;
  RandomStream channel;
  RandomStream verify;
  RandomStream llm;

  static RoundStreams for_round(std::uint64_t seed, std::size_t t);
};

struct GenerationState {
  TokenSequence sequence;
  std::size_t generated = 0;
  std::size_t unsynced_tokens = 0;
};

/// Runs one round and appends its response to the sequence.
RoundRecord run_round(GenerationState& state, const EngineConfig& cfg,
                      const BackendPair& backends, RoundStreams& streams);

/// Receives each record as it is produced. `on_abort` is called with the
/// failure message before the error propagates.
struct RoundSink {
  std::function<void(const RoundRecord&)> on_record;
  std::function<void(const std::string&)> on_abort;
};

struct GenerationResult {
  std::vector<RoundRecord> records;
  RunSummary summary;
};

/// Runs rounds until r_max responses or an EOS response (when stop_on_eos).
GenerationResult run_generation(const EngineConfig& cfg, const BackendPair& backends,
                                const RoundSink* sink = nullptr);

RunSummary summarize(const std::vector<RoundRecord>& records, const EngineConfig& cfg);

/// Share of would-be-accepted rounds that were skipped. Needs oracle-mode
/// records; throws when a skipped round lacks its counterfactual.
double compute_tsr(const std::vector<RoundRecord>& records);

struct IdentityCheck {
  bool ok = true;
  std::string detail;
};

/// Checks every round time against the latency branch for its delta and
/// that the summary throughput equals tokens / total time within 1e-9.
IdentityCheck throughput_identity_check(const std::vector<RoundRecord>& records,
                                        const RunSummary& summary,
                                        const EngineConfig& cfg);

/// Round time for a round with the given gate and uplink time.
double round_time(const EngineConfig& cfg, int delta, double tau_uplink_s);

}  // namespace uhlm
