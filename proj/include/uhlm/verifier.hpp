#pragma once

#include <optional>
#include <string_view>

#include "uhlm/core_math.hpp"

namespace uhlm {

enum class Decision { ImmediateAccept, ProbabilisticAccept, Rejected };

std::string_view to_string(Decision d);
Decision decision_from_string(std::string_view s);

inline bool is_accept(Decision d) { return d != Decision::Rejected; }

struct VerificationOutcome {
  Decision decision = Decision::ImmediateAccept;
  TokenId response;
  double beta = 0.0;
  std::optional<VocabDistribution> residual;  // present iff Rejected
};

/// max(1 - y_d / x_d, 0). Requires x_d > 0.
double rejection_probability(double x_d, double y_d);

/// norm(max(y - x, 0)). Throws when the positive part has no mass.
VocabDistribution residual_distribution(const VocabDistribution& x,
                                        const VocabDistribution& y);

/// Server-side verification of draft `d` (drawn from `x`) against target `y`.
/// Consumes one uniform for the accept/reject coin when x_d > y_d and one
/// more for resampling after a rejection.
VerificationOutcome verify(const VocabDistribution& x, const VocabDistribution& y,
                           TokenId d, RandomStream& rng);

/// Exact law of verify()'s response token with the draft marginalised over
/// x. Equals y up to rounding.
VocabDistribution effective_distribution(const VocabDistribution& x,
                                         const VocabDistribution& y);

}  // namespace uhlm
