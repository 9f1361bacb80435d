#include "uhlm/core_math.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "uhlm/error.hpp"

namespace uhlm {

namespace {

// exp(-745) underflows; anything at or below this reads as "no mass".
constexpr double kLogFloor = -700.0;

VocabDistribution softmax_scaled(std::span<const double> z, double inv_theta) {
  const double zmax = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp((z[i] - zmax) * inv_theta);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return VocabDistribution(std::move(out));
}

}  // namespace

Vocabulary::Vocabulary(std::size_t size, TokenId eos) : size_(size), eos_(eos) {
  if (size_ < 2) throw config_error("vocabulary size must be at least 2");
  if (eos_.index >= size_) throw config_error("eos_id outside vocabulary");
}

LogitVector::LogitVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw numerical_error("invalid logits: empty vector");
  for (double v : values_) {
    if (!std::isfinite(v)) throw numerical_error("invalid logits: non-finite entry");
  }
}

VocabDistribution::VocabDistribution(std::vector<double> probs)
    : probs_(std::move(probs)) {
  if (probs_.empty()) throw numerical_error("invalid distribution: empty");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || p > 1.0 + kTolerance) {
      throw numerical_error("invalid distribution: entry outside [0,1]");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kTolerance) {
    throw numerical_error("invalid distribution: sum " + std::to_string(total));
  }
}

VocabDistribution VocabDistribution::normalized(std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw numerical_error("cannot normalise: negative or non-finite weight");
    }
    total += w;
  }
  if (!(total > 0.0)) throw numerical_error("cannot normalise: zero total mass");
  for (double& w : weights) w /= total;
  return VocabDistribution(std::move(weights));
}

VocabDistribution softmax(const LogitVector& z) {
  if (z.size() == 0) throw numerical_error("invalid logits: empty vector");
  return softmax_scaled(z.values(), 1.0);
}

VocabDistribution temperature_softmax(const LogitVector& z, double theta,
                                      double theta_min) {
  if (!(theta >= theta_min) || !std::isfinite(theta)) {
    throw numerical_error("invalid temperature " + std::to_string(theta));
  }
  if (z.size() == 0) throw numerical_error("invalid logits: empty vector");
  return softmax_scaled(z.values(), 1.0 / theta);
}

TokenId sample_categorical(const VocabDistribution& p, RandomStream& rng) {
  const auto probs = p.probs();
  if (probs.empty()) throw numerical_error("cannot sample from empty distribution");
  const double u = rng.uniform();
  double cdf = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cdf += probs[i];
    last_positive = i;
    if (u < cdf) return TokenId{static_cast<std::uint32_t>(i)};
  }
  // Rounding left the total a hair under u.
  return TokenId{static_cast<std::uint32_t>(last_positive)};
}

LogitVector log_probs(const VocabDistribution& p) {
  std::vector<double> z(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    z[i] = p[i] > 0.0 ? std::max(std::log(p[i]), kLogFloor) : kLogFloor;
  }
  return LogitVector(std::move(z));
}

double entropy(const VocabDistribution& p) {
  double h = 0.0;
  for (double v : p.probs()) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

double total_variation(const VocabDistribution& p, const VocabDistribution& q) {
  if (p.size() != q.size()) throw numerical_error("distribution size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

}  // namespace uhlm
