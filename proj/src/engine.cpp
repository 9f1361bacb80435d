#include "uhlm/engine.hpp"

#include <cmath>
#include <sstream>

#include "uhlm/error.hpp"

namespace uhlm {

namespace {

double slm_time(const EngineConfig& cfg) {
  // Perturbation passes are only paid for by the method that gates on them.
  const double extra = cfg.method == Method::UHLM ? cfg.latency.perturbation_cost : 0.0;
  return cfg.latency.tau_slm_s * (1.0 + extra);
}

RecordedOutcome record(const VerificationOutcome& o) {
  return {o.decision, o.response, o.beta};
}

bool gates_on_uncertainty(const EngineConfig& cfg) {
  return cfg.method == Method::UHLM;
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::LLM: return "llm";
    case Method::SLM: return "slm";
    case Method::HLM: return "hlm";
    case Method::RandHLM: return "rand-hlm";
    case Method::UHLM: return "u-hlm";
  }
  return "unknown";
}

Method method_from_string(std::string_view s) {
  if (s == "llm") return Method::LLM;
  if (s == "slm") return Method::SLM;
  if (s == "hlm") return Method::HLM;
  if (s == "rand-hlm" || s == "randhlm") return Method::RandHLM;
  if (s == "u-hlm" || s == "uhlm") return Method::UHLM;
  throw config_error("unknown method '" + std::string(s) +
                     "' (expected llm, slm, hlm, rand-hlm or u-hlm)");
}

void EngineConfig::validate() const {
  if (r_max == 0) throw config_error("r_max must be positive");
  if (!std::isfinite(u_th)) throw config_error("u_th must be finite");
  if (!(rand_skip_prob >= 0.0 && rand_skip_prob <= 1.0)) {
    throw config_error("rand_skip_prob must lie in [0, 1]");
  }
  if (!(latency.tau_slm_s >= 0.0) || !(latency.tau_llm_s >= 0.0)) {
    throw config_error("compute latencies must be non-negative");
  }
  if (!(latency.perturbation_cost >= 0.0)) {
    throw config_error("perturbation_cost must be non-negative");
  }
  if (payload_vocab_size && *payload_vocab_size == 0) {
    throw config_error("payload_vocab_size must be positive");
  }
  channel.validate();
  perturbation.validate();
}

RoundStreams RoundStreams::for_round(std::uint64_t seed, std::size_t t) {
  const std::string suffix = "/" + std::to_string(t);
  return {RandomStream(seed, "draft" + suffix),   RandomStream(seed, "perturbation" + suffix),
          RandomStream(seed, "gate" + suffix),    RandomStream(seed, "channel" + suffix),
          RandomStream(seed, "verify" + suffix),  RandomStream(seed, "llm" + suffix)};
}

double round_time(const EngineConfig& cfg, int delta, double tau_uplink_s) {
  if (cfg.method == Method::LLM) return cfg.latency.tau_llm_s;
  if (delta == 0) return slm_time(cfg);
  return slm_time(cfg) + (tau_uplink_s + cfg.latency.tau_llm_s);
}

RoundRecord run_round(GenerationState& state, const EngineConfig& cfg,
                      const BackendPair& backends, RoundStreams& streams) {
  RoundRecord rec;
  rec.t = state.generated + 1;

  if (cfg.method == Method::LLM) {
    // Generation resident at the base station: no draft, no uplink.
    const auto y = softmax(backends.llm->next_logits(state.sequence));
    rec.delta = 1;
    rec.response = sample_categorical(y, streams.llm);
    rec.round_time_s = round_time(cfg, rec.delta, 0.0);
    state.sequence.push_back(rec.response);
    ++state.generated;
    return rec;
  }

  const LogitVector z = backends.slm->next_logits(state.sequence);
  const VocabDistribution x = softmax(z);
  const TokenId d = sample_categorical(x, streams.draft);
  rec.draft = d;
  rec.x_d = x[d];

  if (gates_on_uncertainty(cfg) || cfg.always_measure_uncertainty) {
    rec.u = measure_uncertainty(z, d, cfg.perturbation, streams.perturbation).u;
  }

  switch (cfg.method) {
    case Method::SLM: rec.delta = 0; break;
    case Method::HLM: rec.delta = 1; break;
    case Method::RandHLM: rec.delta = streams.gate.uniform() < cfg.rand_skip_prob ? 0 : 1; break;
    case Method::UHLM: rec.delta = skip_decision(*rec.u, cfg.u_th); break;
    case Method::LLM: break;
  }

  // The gate above is final; everything below only observes it.
  const DraftContext ctx{d, rec.u};
  if (rec.delta == 1) {
    const std::size_t vocab = cfg.payload_vocab_size.value_or(x.size());
    const double bits = static_cast<double>(payload_bits(vocab, cfg.channel.b_prob)) +
                        static_cast<double>(state.unsynced_tokens * cfg.sync_bits);
    const ChannelDraw ch = draw_channel(cfg.channel, bits, streams.channel);
    rec.snr_linear = ch.snr_linear;
    rec.tau_uplink_s = ch.tau_s;

    const auto y = softmax(backends.llm->next_logits(state.sequence, ctx));
    rec.y_d = y[d];
    const VerificationOutcome out = verify(x, y, d, streams.verify);
    rec.outcome = record(out);
    rec.response = out.response;
    state.unsynced_tokens = 0;
  } else {
    rec.response = d;
    if (cfg.oracle_mode) {
      const auto y = softmax(backends.llm->next_logits(state.sequence, ctx));
      rec.y_d = y[d];
      rec.counterfactual_outcome = record(verify(x, y, d, streams.verify));
    }
    ++state.unsynced_tokens;
  }
  rec.round_time_s = round_time(cfg, rec.delta, rec.tau_uplink_s);

  state.sequence.push_back(rec.response);
  ++state.generated;
  return rec;
}

GenerationResult run_generation(const EngineConfig& cfg, const BackendPair& backends,
                                const RoundSink* sink) {
  cfg.validate();
  check_pair(backends);
  check_sequence(cfg.prompt, backends.vocab());

  GenerationResult result;
  GenerationState state;
  state.sequence = cfg.prompt;
  const TokenId eos = backends.vocab().eos();
  try {
    while (state.generated < cfg.r_max) {
      RoundStreams streams = RoundStreams::for_round(cfg.seed, state.generated + 1);
      RoundRecord rec = run_round(state, cfg, backends, streams);
      if (sink && sink->on_record) sink->on_record(rec);
      const bool stop = cfg.stop_on_eos && rec.response == eos;
      result.records.push_back(std::move(rec));
      if (stop) break;
    }
  } catch (const std::exception& e) {
    if (sink && sink->on_abort) sink->on_abort(e.what());
    throw;
  }
  result.summary = summarize(result.records, cfg);
  return result;
}

RunSummary summarize(const std::vector<RoundRecord>& records, const EngineConfig& cfg) {
  RunSummary s;
  s.tokens_generated = records.size();
  if (records.empty()) return s;

  std::size_t transmitted = 0, skipped = 0, beta_n = 0, u_n = 0;
  double beta_sum = 0.0, u_sum = 0.0, skipped_beta = 0.0;
  bool counterfactuals_complete = true;
  for (const auto& r : records) {
    s.total_time_s += r.round_time_s;
    if (r.delta == 1) {
      ++transmitted;
    } else {
      ++skipped;
    }
    if (r.u) {
      u_sum += *r.u;
      ++u_n;
    }
    if (r.outcome) {
      beta_sum += r.outcome->beta;
      ++beta_n;
    }
    if (r.counterfactual_outcome) {
      beta_sum += r.counterfactual_outcome->beta;
      ++beta_n;
      skipped_beta += r.counterfactual_outcome->beta;
    } else if (r.delta == 0) {
      counterfactuals_complete = false;
    }
  }
  const double n = static_cast<double>(records.size());
  s.throughput_tok_per_s = n / s.total_time_s;
  s.TR = static_cast<double>(transmitted) / n;
  s.skip_rate = static_cast<double>(skipped) / n;
  if (beta_n > 0) s.mean_beta = beta_sum / static_cast<double>(beta_n);
  if (u_n > 0) s.mean_u = u_sum / static_cast<double>(u_n);

  if (cfg.method == Method::LLM) {
    if (cfg.oracle_mode) s.fidelity_tv = 0.0;
    return s;
  }
  if (cfg.oracle_mode && counterfactuals_complete) {
    s.TSR = compute_tsr(records);
    s.realized_risk = skipped_beta / n;
    // A skipped round answers with its draft where verification would have
    // kept it only with probability 1 - beta: a TV gap of exactly beta.
    s.fidelity_tv = skipped_beta / n;
    if (skipped > 0) s.mean_skipped_beta = skipped_beta / static_cast<double>(skipped);
  }
  return s;
}

double compute_tsr(const std::vector<RoundRecord>& records) {
  std::size_t accepts = 0, skipped_accepts = 0;
  for (const auto& r : records) {
    if (r.delta == 0) {
      if (!r.counterfactual_outcome) {
        throw numerical_error("TSR needs oracle-mode counterfactuals for skipped round " +
                              std::to_string(r.t));
      }
      if (is_accept(r.counterfactual_outcome->decision)) {
        ++accepts;
        ++skipped_accepts;
      }
    } else if (r.outcome && is_accept(r.outcome->decision)) {
      ++accepts;
    }
  }
  return accepts == 0 ? 0.0
                      : static_cast<double>(skipped_accepts) / static_cast<double>(accepts);
}

IdentityCheck throughput_identity_check(const std::vector<RoundRecord>& records,
                                        const RunSummary& summary,
                                        const EngineConfig& cfg) {
  IdentityCheck check;
  double total = 0.0;
  for (const auto& r : records) {
    const double expected = round_time(cfg, r.delta, r.tau_uplink_s);
    if (r.delta == 0 && r.tau_uplink_s != 0.0) {
      std::ostringstream os;
      os << "round " << r.t << ": skipped round carries uplink time " << r.tau_uplink_s;
      return {false, os.str()};
    }
    if (!(std::abs(r.round_time_s - expected) <= 1e-12 * std::max(1.0, expected))) {
      std::ostringstream os;
      os << "round " << r.t << ": round time " << r.round_time_s << " != " << expected;
      return {false, os.str()};
    }
    total += r.round_time_s;
  }
  if (records.empty()) return check;
  const double throughput = static_cast<double>(records.size()) / total;
  if (summary.tokens_generated != records.size() ||
      !(std::abs(summary.throughput_tok_per_s - throughput) <= 1e-9)) {
    std::ostringstream os;
    os << "summary throughput " << summary.throughput_tok_per_s << " != tokens/time "
       << throughput;
    return {false, os.str()};
  }
  return check;
}

}  // namespace uhlm
