#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>

#include "uhlm/backend.hpp"
#include "uhlm/uncertainty.hpp"

namespace uhlm {

/// Sequence-agnostic draft/target generator. Each round gets a fresh
/// (x, y) pair keyed by the sequence length, which models the statistics
/// that matter for verification rather than language.
///
/// Two plants:
///  - Coupled: y ~ Dirichlet(alpha), x = coupling * y + (1 - coupling) * y'
///    with y' an independent Dirichlet draw.
///  - Linear: x ~ Dirichlet(alpha) and the target is bent per round so the
///    draft's rejection probability equals clamp(plant_a * u + plant_b, 0, 1)
///    for the round's measured uncertainty u.
///
/// The last vocabulary entry is the EOS token. It carries no mass except
/// at `eos_at_round`, where both models put all mass on it.
struct SyntheticPairConfig {
  enum class Plant { Coupled, Linear };

  std::size_t vocab_size = 64;
  double dirichlet_alpha = 1.0;
  double coupling = 0.5;
  /// Coupled plant: tune coupling so E[beta] matches this value.
  std::optional<double> planted_rejection_mean;

  Plant plant = Plant::Coupled;
  double plant_a = 0.82;
  double plant_b = -0.06;
  /// Linear plant: mix in near-deterministic rounds so that
  /// P(y_d < x_d) matches this value.
  std::optional<double> planted_delta;

  std::optional<std::size_t> eos_at_round;
  std::uint64_t seed = 0;
  /// Perturbation settings used by the device; needed to solve planted_delta.
  PerturbationConfig perturbation;

  void validate() const;
};

struct DistributionPair {
  VocabDistribution x;
  VocabDistribution y;
};

/// Coupled-plant pair generator with the coupling resolved once.
class SyntheticPairGenerator {
 public:
  explicit SyntheticPairGenerator(const SyntheticPairConfig& cfg);

  double coupling() const noexcept { return coupling_; }
  DistributionPair generate(RandomStream& rng) const;

 private:
  SyntheticPairConfig cfg_;
  double coupling_;
};

/// One coupled pair; resolves planted_rejection_mean on every call.
DistributionPair synthetic_pair(const SyntheticPairConfig& cfg, RandomStream& rng);

/// Expected rejection probability of a random draft, sum_v max(x_v - y_v, 0).
double mean_rejection(const VocabDistribution& x, const VocabDistribution& y);

/// Probability that one temperature-perturbed resample of `z` differs from
/// token d, averaged over theta ~ U[theta_min, theta_max] (Simpson rule).
/// Returns one entry per token.
std::vector<double> perturbation_mismatch(const LogitVector& z,
                                          const PerturbationConfig& cfg);

/// P(u > u_threshold) for a draft drawn from x, with u the K-sample
/// mismatch fraction. Exact up to quadrature error.
double prob_uncertainty_above(const VocabDistribution& x, const PerturbationConfig& cfg,
                              double u_threshold);

class SyntheticPairSource {
 public:
  explicit SyntheticPairSource(SyntheticPairConfig cfg);

  const SyntheticPairConfig& config() const noexcept { return cfg_; }
  const Vocabulary& vocab() const noexcept { return vocab_; }
  double coupling() const noexcept { return coupling_; }
  double confident_fraction() const noexcept { return confident_fraction_; }

  VocabDistribution draft(std::size_t round) const;
  VocabDistribution target(std::size_t round) const;
  VocabDistribution target(std::size_t round, const DraftContext& ctx) const;

 private:
  DistributionPair base_pair(std::size_t round) const;

  SyntheticPairConfig cfg_;
  Vocabulary vocab_;
  double coupling_ = 0.0;
  double confident_fraction_ = 0.0;
};

class SyntheticBackend final : public ModelBackend {
 public:
  SyntheticBackend(std::shared_ptr<const SyntheticPairSource> source, Role role)
      : source_(std::move(source)), role_(role) {}

  Role role() const override { return role_; }
  const Vocabulary& vocab() const override { return source_->vocab(); }
  LogitVector next_logits(const TokenSequence& sequence) const override;
  LogitVector next_logits(const TokenSequence& sequence,
                          const DraftContext& ctx) const override;

 private:
  std::shared_ptr<const SyntheticPairSource> source_;
  Role role_;
};

BackendPair make_synthetic_pair(const SyntheticPairConfig& cfg);

}  // namespace uhlm
