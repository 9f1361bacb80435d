#include "uhlm/verifier.hpp"

#include <algorithm>
#include <string>

#include "uhlm/error.hpp"

namespace uhlm {

namespace {

// Below this the residual is rounding noise, not a distribution.
constexpr double kResidualFloor = 1e-15;

double positive_part_mass(const VocabDistribution& x, const VocabDistribution& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::max(y[i] - x[i], 0.0);
  return s;
}

void check_pair(const VocabDistribution& x, const VocabDistribution& y) {
  if (x.size() != y.size()) {
    throw numerical_error("draft and target distributions differ in size");
  }
}

}  // namespace

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::ImmediateAccept: return "immediate_accept";
    case Decision::ProbabilisticAccept: return "probabilistic_accept";
    case Decision::Rejected: return "rejected";
  }
  return "unknown";
}

Decision decision_from_string(std::string_view s) {
  if (s == "immediate_accept") return Decision::ImmediateAccept;
  if (s == "probabilistic_accept") return Decision::ProbabilisticAccept;
  if (s == "rejected") return Decision::Rejected;
  throw numerical_error("unknown verification decision '" + std::string(s) + "'");
}

double rejection_probability(double x_d, double y_d) {
  if (!(x_d > 0.0)) throw numerical_error("invalid draft probability: x_d must be > 0");
  return std::max(1.0 - y_d / x_d, 0.0);
}

VocabDistribution residual_distribution(const VocabDistribution& x,
                                        const VocabDistribution& y) {
  check_pair(x, y);
  std::vector<double> w(x.size());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    w[i] = std::max(y[i] - x[i], 0.0);
    total += w[i];
  }
  if (!(total > 0.0)) {
    throw numerical_error("degenerate residual: target never exceeds draft");
  }
  for (double& v : w) v /= total;
  return VocabDistribution(std::move(w));
}

VerificationOutcome verify(const VocabDistribution& x, const VocabDistribution& y,
                           TokenId d, RandomStream& rng) {
  check_pair(x, y);
  if (d.index >= x.size()) throw numerical_error("draft token outside vocabulary");
  const double x_d = x[d];
  const double y_d = y[d];
  const double beta = rejection_probability(x_d, y_d);

  VerificationOutcome out;
  out.response = d;
  out.beta = beta;
  if (x_d <= y_d) {
    out.decision = Decision::ImmediateAccept;
    return out;
  }
  if (rng.uniform() >= 1.0 - y_d / x_d) {
    out.decision = Decision::ProbabilisticAccept;
    return out;
  }
  if (positive_part_mass(x, y) < kResidualFloor) {
    out.decision = Decision::ProbabilisticAccept;
    return out;
  }
  out.decision = Decision::Rejected;
  out.residual = residual_distribution(x, y);
  out.response = sample_categorical(*out.residual, rng);
  return out;
}

VocabDistribution effective_distribution(const VocabDistribution& x,
                                         const VocabDistribution& y) {
  check_pair(x, y);
  const std::size_t n = x.size();
  // Rejection mass sum_w x_w * max(1 - y_w/x_w, 0) == sum_w max(x_w - y_w, 0).
  double reject_mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) reject_mass += std::max(x[i] - y[i], 0.0);

  std::vector<double> eff(n);
  for (std::size_t i = 0; i < n; ++i) eff[i] = std::min(x[i], y[i]);
  const double residual_mass = positive_part_mass(x, y);
  if (residual_mass > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      eff[i] += reject_mass * std::max(y[i] - x[i], 0.0) / residual_mass;
    }
  }
  return VocabDistribution(std::move(eff));
}

}  // namespace uhlm
