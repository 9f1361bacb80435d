#pragma once

#include <vector>

#include "uhlm/core_math.hpp"

namespace uhlm {

struct PerturbationConfig {
  int K = 20;
  double theta_max = 2.0;
  double theta_min = kMinTemperature;

  void validate() const;
};

struct UncertaintyEstimate {
  double u = 0.0;
  int mismatches = 0;
};

/// K temperatures, i.i.d. uniform on [theta_min, theta_max].
std::vector<double> sample_temperatures(const PerturbationConfig& cfg,
                                        RandomStream& rng);

/// Fraction of K temperature-perturbed resamples of `z` that differ from
/// the draft `d`. Temperatures come from `rng` itself; sample k draws from
/// the child stream "<label>/k", so the count is independent of evaluation
/// order.
UncertaintyEstimate measure_uncertainty(const LogitVector& z, TokenId d,
                                        const PerturbationConfig& cfg,
                                        RandomStream& rng);

/// Uplink gate: 0 (skip) when u <= u_th, otherwise 1 (transmit).
inline int skip_decision(double u, double u_th) { return u <= u_th ? 0 : 1; }

}  // namespace uhlm
