#pragma once

#include <cstdint>
#include <limits>

#include "uhlm/random_stream.hpp"

namespace uhlm {

enum class Fading { Rayleigh, None };

/// Uplink parameters. Defaults: 1 MHz, 23 dBm transmit, -104 dBm noise,
/// path-loss exponent 4 at 2.5 km, half-precision payload.
struct ChannelParams {
  double W_hz = 1e6;
  double p_dbm = 23.0;
  double N_dbm = -104.0;
  double alpha = 4.0;
  double rho_m = 2500.0;
  int b_prob = 16;
  Fading fading = Fading::Rayleigh;

  void validate() const;
};

inline constexpr double kInfiniteLatency = std::numeric_limits<double>::infinity();

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);

/// Bits needed to ship one vocabulary distribution.
std::uint64_t payload_bits(std::uint64_t vocab_size, int b_prob);

/// Average received SNR p * rho^-alpha / N (linear).
double mean_snr(const ChannelParams& params);
double mean_snr_db(const ChannelParams& params);

/// One block-fading draw: mean SNR scaled by a unit-mean exponential power
/// gain (Rayleigh), or by 1 when fading is disabled.
double sample_snr(const ChannelParams& params, RandomStream& rng);

/// Shannon-rate transmission time B / (W log2(1 + snr)); infinite at snr 0.
double uplink_latency(double bits, const ChannelParams& params, double snr_linear);

struct ChannelDraw {
  double snr_linear = 0.0;
  double tau_s = 0.0;
};

ChannelDraw draw_channel(const ChannelParams& params, double bits, RandomStream& rng);

}  // namespace uhlm
