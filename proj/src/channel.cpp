#include "uhlm/channel.hpp"

#include <cmath>

#include "uhlm/error.hpp"

namespace uhlm {

void ChannelParams::validate() const {
  if (!(W_hz > 0.0)) throw config_error("channel bandwidth W must be positive");
  if (!(alpha > 0.0)) throw config_error("path-loss exponent must be positive");
  if (!(rho_m > 0.0)) throw config_error("device distance must be positive");
  if (b_prob != 16 && b_prob != 32) throw config_error("b_prob must be 16 or 32");
  if (!std::isfinite(p_dbm) || !std::isfinite(N_dbm)) {
    throw config_error("transmit and noise power must be finite");
  }
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double watts_to_dbm(double watts) { return 10.0 * std::log10(watts) + 30.0; }

std::uint64_t payload_bits(std::uint64_t vocab_size, int b_prob) {
  return vocab_size * static_cast<std::uint64_t>(b_prob);
}

double mean_snr(const ChannelParams& params) {
  return dbm_to_watts(params.p_dbm) * std::pow(params.rho_m, -params.alpha) /
         dbm_to_watts(params.N_dbm);
}

double mean_snr_db(const ChannelParams& params) {
  return 10.0 * std::log10(mean_snr(params));
}

double sample_snr(const ChannelParams& params, RandomStream& rng) {
  const double gain = params.fading == Fading::Rayleigh ? rng.exponential() : 1.0;
  return mean_snr(params) * gain;
}

double uplink_latency(double bits, const ChannelParams& params, double snr_linear) {
  if (!(snr_linear > 0.0)) return kInfiniteLatency;
  return bits / (params.W_hz * std::log2(1.0 + snr_linear));
}

ChannelDraw draw_channel(const ChannelParams& params, double bits, RandomStream& rng) {
  ChannelDraw d;
  d.snr_linear = sample_snr(params, rng);
  d.tau_s = uplink_latency(bits, params, d.snr_linear);
  return d;
}

}  // namespace uhlm
