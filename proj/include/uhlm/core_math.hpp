#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "uhlm/random_stream.hpp"

namespace uhlm {

/// Token index into the shared vocabulary.
struct TokenId {
  std::uint32_t index = 0;

  friend bool operator==(TokenId, TokenId) = default;
  friend auto operator<=>(TokenId, TokenId) = default;
};

using TokenSequence = std::vector<TokenId>;

class Vocabulary {
 public:
  Vocabulary(std::size_t size, TokenId eos);

  std::size_t size() const noexcept { return size_; }
  TokenId eos() const noexcept { return eos_; }
  bool contains(TokenId t) const noexcept { return t.index < size_; }

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::size_t size_;
  TokenId eos_;
};

/// Raw, unnormalised next-token scores. Entries must be finite.
class LogitVector {
 public:
  LogitVector() = default;
  explicit LogitVector(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const LogitVector&, const LogitVector&) = default;

 private:
  std::vector<double> values_;
};

/// Probability vector over the vocabulary. Construction validates
/// non-negativity and a unit sum within kTolerance.
class VocabDistribution {
 public:
  static constexpr double kTolerance = 1e-9;

  VocabDistribution() = default;
  explicit VocabDistribution(std::vector<double> probs);

  /// Renormalises a non-negative weight vector with positive total.
  static VocabDistribution normalized(std::vector<double> weights);

  std::span<const double> probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  double operator[](TokenId t) const { return probs_[t.index]; }

  friend bool operator==(const VocabDistribution&,
                         const VocabDistribution&) = default;

 private:
  std::vector<double> probs_;
};

/// Smallest admissible temperature; theta = 0 is singular.
inline constexpr double kMinTemperature = 1e-3;

VocabDistribution softmax(const LogitVector& z);
VocabDistribution temperature_softmax(const LogitVector& z, double theta,
                                      double theta_min = kMinTemperature);

/// Inverse-CDF draw from p using one uniform.
TokenId sample_categorical(const VocabDistribution& p, RandomStream& rng);

/// Natural log of each probability; zero mass maps to a large negative
/// finite value so the result is a valid LogitVector.
LogitVector log_probs(const VocabDistribution& p);

double entropy(const VocabDistribution& p);
double total_variation(const VocabDistribution& p, const VocabDistribution& q);

}  // namespace uhlm
