#include "uhlm/uncertainty.hpp"

#include "uhlm/error.hpp"

namespace uhlm {

void PerturbationConfig::validate() const {
  if (K < 1) throw config_error("perturbation K must be >= 1");
  if (!(theta_min > 0.0) || !(theta_min < theta_max)) {
    throw config_error("perturbation temperatures need 0 < theta_min < theta_max");
  }
}

std::vector<double> sample_temperatures(const PerturbationConfig& cfg,
                                        RandomStream& rng) {
  cfg.validate();
  std::vector<double> thetas(static_cast<std::size_t>(cfg.K));
  for (double& t : thetas) t = rng.uniform(cfg.theta_min, cfg.theta_max);
  return thetas;
}

UncertaintyEstimate measure_uncertainty(const LogitVector& z, TokenId d,
                                        const PerturbationConfig& cfg,
                                        RandomStream& rng) {
  if (d.index >= z.size()) throw numerical_error("draft token outside vocabulary");
  const auto thetas = sample_temperatures(cfg, rng);
  UncertaintyEstimate est;
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    RandomStream sub = rng.derive(k);
    const TokenId dk =
        sample_categorical(temperature_softmax(z, thetas[k], cfg.theta_min), sub);
    if (dk != d) ++est.mismatches;
  }
  est.u = static_cast<double>(est.mismatches) / cfg.K;
  return est;
}

}  // namespace uhlm
