#include "uhlm/synthetic_backend.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uhlm/error.hpp"

namespace uhlm {

namespace {

constexpr int kTuningPairs = 4000;
constexpr int kSimpsonIntervals = 128;
// Mass left off the top token in a near-deterministic (confident) round.
constexpr double kConfidentSlack = 1e-6;
// A planted rejection probability of exactly 1 would zero y_d.
constexpr double kMaxPlantedBeta = 1.0 - 1e-9;

std::vector<double> dirichlet_weights(std::size_t support, double alpha,
                                      RandomStream& rng) {
  std::vector<double> g(support);
  double total = 0.0;
  for (double& v : g) {
    v = std::max(rng.gamma(alpha), 1e-300);
    total += v;
  }
  for (double& v : g) v /= total;
  return g;
}

// Dirichlet draw over every token but EOS (the last index).
VocabDistribution dirichlet_without_eos(std::size_t vocab_size, double alpha,
                                        RandomStream& rng) {
  auto w = dirichlet_weights(vocab_size - 1, alpha, rng);
  w.push_back(0.0);
  return VocabDistribution::normalized(std::move(w));
}

VocabDistribution mix(const VocabDistribution& y, const VocabDistribution& other,
                      double coupling) {
  std::vector<double> w(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    w[i] = coupling * y[i] + (1.0 - coupling) * other[i];
  }
  return VocabDistribution::normalized(std::move(w));
}

VocabDistribution make_confident(const VocabDistribution& x) {
  const auto p = x.probs();
  const auto top = static_cast<std::size_t>(
      std::max_element(p.begin(), p.end()) - p.begin());
  const double rest = 1.0 - p[top];
  std::vector<double> w(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    w[i] = i == top ? 1.0 - kConfidentSlack
                    : (rest > 0.0 ? kConfidentSlack * p[i] / rest : 0.0);
  }
  return VocabDistribution::normalized(std::move(w));
}

VocabDistribution one_hot(std::size_t size, std::size_t index) {
  std::vector<double> w(size, 0.0);
  w[index] = 1.0;
  return VocabDistribution(std::move(w));
}

double binomial_upper_tail(int K, double q, int above) {
  // P(M > above) for M ~ Binomial(K, q).
  double tail = 0.0;
  for (int m = above + 1; m <= K; ++m) {
    const double log_coef =
        std::lgamma(K + 1.0) - std::lgamma(m + 1.0) - std::lgamma(K - m + 1.0);
    const double lq = q > 0.0 ? m * std::log(q) : (m == 0 ? 0.0 : -INFINITY);
    const double lr = q < 1.0 ? (K - m) * std::log1p(-q) : (K == m ? 0.0 : -INFINITY);
    tail += std::exp(log_coef + lq + lr);
  }
  return std::min(tail, 1.0);
}

double resolve_coupling(const SyntheticPairConfig& cfg) {
  if (!cfg.planted_rejection_mean) return cfg.coupling;
  const double target = *cfg.planted_rejection_mean;
  // With x - y = (1 - c)(y' - y), E[beta] = (1 - c) * E[TV(y, y')].
  RandomStream rng(cfg.seed, "synthetic/tune-coupling");
  double tv = 0.0;
  for (int i = 0; i < kTuningPairs; ++i) {
    const auto y = dirichlet_without_eos(cfg.vocab_size, cfg.dirichlet_alpha, rng);
    const auto yp = dirichlet_without_eos(cfg.vocab_size, cfg.dirichlet_alpha, rng);
    tv += total_variation(y, yp);
  }
  tv /= kTuningPairs;
  if (target > tv) {
    throw numerical_error("calibration infeasible: planted rejection mean " +
                          std::to_string(target) + " exceeds the maximum " +
                          std::to_string(tv) + " reachable at this sharpness");
  }
  return 1.0 - target / tv;
}

double resolve_confident_fraction(const SyntheticPairConfig& cfg) {
  if (!cfg.planted_delta) return 0.0;
  const double target = *cfg.planted_delta;
  const double u0 = -cfg.plant_b / cfg.plant_a;
  RandomStream rng(cfg.seed, "synthetic/tune-delta");
  double diffuse = 0.0;
  double confident = 0.0;
  for (int i = 0; i < kTuningPairs; ++i) {
    const auto x = dirichlet_without_eos(cfg.vocab_size, cfg.dirichlet_alpha, rng);
    diffuse += prob_uncertainty_above(x, cfg.perturbation, u0);
    confident += prob_uncertainty_above(make_confident(x), cfg.perturbation, u0);
  }
  diffuse /= kTuningPairs;
  confident /= kTuningPairs;
  if (target > diffuse || target < confident) {
    throw numerical_error("calibration infeasible: planted delta " +
                          std::to_string(target) + " outside reachable range [" +
                          std::to_string(confident) + ", " + std::to_string(diffuse) +
                          "]");
  }
  return (diffuse - target) / (diffuse - confident);
}

}  // namespace

void SyntheticPairConfig::validate() const {
  if (vocab_size < 3) throw config_error("synthetic vocab_size must be >= 3");
  if (!(dirichlet_alpha > 0.0)) throw config_error("dirichlet_alpha must be positive");
  if (!(coupling >= 0.0 && coupling <= 1.0)) {
    throw config_error("coupling must lie in [0, 1]");
  }
  if (planted_rejection_mean &&
      !(*planted_rejection_mean >= 0.0 && *planted_rejection_mean <= 1.0)) {
    throw config_error("planted_rejection_mean must lie in [0, 1]");
  }
  if (plant == Plant::Linear && !(plant_a > 0.0)) {
    throw config_error("linear plant needs plant_a > 0");
  }
  if (planted_delta) {
    if (plant != Plant::Linear) throw config_error("planted_delta needs the linear plant");
    if (!(*planted_delta >= 0.0 && *planted_delta <= 1.0)) {
      throw config_error("planted_delta must lie in [0, 1]");
    }
  }
  perturbation.validate();
}

SyntheticPairGenerator::SyntheticPairGenerator(const SyntheticPairConfig& cfg)
    : cfg_(cfg) {
  cfg_.validate();
  coupling_ = resolve_coupling(cfg_);
}

DistributionPair SyntheticPairGenerator::generate(RandomStream& rng) const {
  auto y = dirichlet_without_eos(cfg_.vocab_size, cfg_.dirichlet_alpha, rng);
  const auto other = dirichlet_without_eos(cfg_.vocab_size, cfg_.dirichlet_alpha, rng);
  auto x = mix(y, other, coupling_);
  return {std::move(x), std::move(y)};
}

DistributionPair synthetic_pair(const SyntheticPairConfig& cfg, RandomStream& rng) {
  return SyntheticPairGenerator(cfg).generate(rng);
}

double mean_rejection(const VocabDistribution& x, const VocabDistribution& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::max(x[i] - y[i], 0.0);
  return s;
}

std::vector<double> perturbation_mismatch(const LogitVector& z,
                                          const PerturbationConfig& cfg) {
  cfg.validate();
  const double h = (cfg.theta_max - cfg.theta_min) / kSimpsonIntervals;
  std::vector<double> match(z.size(), 0.0);
  for (int i = 0; i <= kSimpsonIntervals; ++i) {
    const double w = (i == 0 || i == kSimpsonIntervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const auto p = temperature_softmax(z, cfg.theta_min + i * h, cfg.theta_min);
    for (std::size_t v = 0; v < z.size(); ++v) match[v] += w * p[v];
  }
  for (double& m : match) m = std::clamp(1.0 - m / (3.0 * kSimpsonIntervals), 0.0, 1.0);
  return match;
}

double prob_uncertainty_above(const VocabDistribution& x, const PerturbationConfig& cfg,
                              double u_threshold) {
  const auto mismatch = perturbation_mismatch(log_probs(x), cfg);
  // u > u_threshold  <=>  mismatches > floor(K * u_threshold).
  const int above = static_cast<int>(std::floor(cfg.K * u_threshold + 1e-12));
  if (above < 0) return 1.0;
  double p = 0.0;
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (x[d] > 0.0) p += x[d] * binomial_upper_tail(cfg.K, mismatch[d], above);
  }
  return p;
}

SyntheticPairSource::SyntheticPairSource(SyntheticPairConfig cfg)
    : cfg_(std::move(cfg)),
      vocab_(cfg_.vocab_size, TokenId{static_cast<std::uint32_t>(cfg_.vocab_size - 1)}) {
  cfg_.validate();
  if (cfg_.plant == SyntheticPairConfig::Plant::Coupled) {
    coupling_ = resolve_coupling(cfg_);
  } else {
    confident_fraction_ = resolve_confident_fraction(cfg_);
  }
}

DistributionPair SyntheticPairSource::base_pair(std::size_t round) const {
  if (cfg_.eos_at_round && *cfg_.eos_at_round == round) {
    auto eos = one_hot(cfg_.vocab_size, vocab_.eos().index);
    return {eos, eos};
  }
  RandomStream rng(cfg_.seed, "synthetic/round/" + std::to_string(round));
  if (cfg_.plant == SyntheticPairConfig::Plant::Coupled) {
    auto y = dirichlet_without_eos(cfg_.vocab_size, cfg_.dirichlet_alpha, rng);
    const auto other = dirichlet_without_eos(cfg_.vocab_size, cfg_.dirichlet_alpha, rng);
    auto x = mix(y, other, coupling_);
    return {std::move(x), std::move(y)};
  }
  const bool confident = rng.uniform() < confident_fraction_;
  auto x = dirichlet_without_eos(cfg_.vocab_size, cfg_.dirichlet_alpha, rng);
  if (confident) x = make_confident(x);
  return {x, x};
}

VocabDistribution SyntheticPairSource::draft(std::size_t round) const {
  return base_pair(round).x;
}

VocabDistribution SyntheticPairSource::target(std::size_t round) const {
  return base_pair(round).y;
}

VocabDistribution SyntheticPairSource::target(std::size_t round,
                                              const DraftContext& ctx) const {
  auto pair = base_pair(round);
  if (cfg_.plant != SyntheticPairConfig::Plant::Linear || !ctx.u) return pair.y;
  const auto& x = pair.x;
  const std::size_t d = ctx.draft.index;
  if (d >= x.size()) throw numerical_error("draft token outside vocabulary");
  const double beta =
      std::clamp(cfg_.plant_a * *ctx.u + cfg_.plant_b, 0.0, kMaxPlantedBeta);
  const double rest = 1.0 - x[d];
  if (beta == 0.0 || !(rest > 0.0)) return pair.y;
  // Move beta * x_d off the draft, spread over the other tokens in
  // proportion to x, so that 1 - y_d / x_d == beta.
  const double moved = beta * x[d];
  std::vector<double> w(x.size());
  for (std::size_t v = 0; v < x.size(); ++v) {
    w[v] = v == d ? x[d] - moved : x[v] + moved * x[v] / rest;
  }
  return VocabDistribution::normalized(std::move(w));
}

LogitVector SyntheticBackend::next_logits(const TokenSequence& sequence) const {
  check_sequence(sequence, vocab());
  const auto round = sequence.size();
  return log_probs(role_ == Role::SLM ? source_->draft(round) : source_->target(round));
}

LogitVector SyntheticBackend::next_logits(const TokenSequence& sequence,
                                          const DraftContext& ctx) const {
  if (role_ == Role::SLM) return next_logits(sequence);
  check_sequence(sequence, vocab());
  return log_probs(source_->target(sequence.size(), ctx));
}

BackendPair make_synthetic_pair(const SyntheticPairConfig& cfg) {
  auto source = std::make_shared<const SyntheticPairSource>(cfg);
  return {std::make_shared<SyntheticBackend>(source, Role::SLM),
          std::make_shared<SyntheticBackend>(source, Role::LLM)};
}

}  // namespace uhlm
