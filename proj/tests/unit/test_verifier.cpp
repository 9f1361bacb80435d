#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracle_values.hpp"
#include "uhlm/error.hpp"
#include "uhlm/verifier.hpp"

using namespace uhlm;

namespace {

VocabDistribution dirichlet(RandomStream& rng, std::size_t n, double alpha) {
  std::vector<double> w(n);
  for (auto& v : w) v = rng.gamma(alpha);
  return VocabDistribution::normalized(w);
}

}  // namespace

TEST_CASE("rejection probability examples") {
  CHECK(rejection_probability(0.5, 0.25) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(rejection_probability(0.2, 0.6) == 0.0);
  CHECK(std::abs(rejection_probability(0.4, 0.3) - oracle::kRejection04_03) < 1e-15);
  CHECK_THROWS_AS(rejection_probability(0.0, 0.5), Error);
}

TEST_CASE("residual distribution examples") {
  const auto r0 = residual_distribution(VocabDistribution({0.5, 0.5}), VocabDistribution({0.8, 0.2}));
  CHECK(r0[0] == 1.0);
  CHECK(r0[1] == 0.0);
  const auto r1 = residual_distribution(VocabDistribution({0.2, 0.3, 0.5}),
                                        VocabDistribution({0.5, 0.3, 0.2}));
  CHECK(std::abs(r1[0] - oracle::kResidualA0) < 1e-12);
  CHECK(std::abs(r1[1] - oracle::kResidualA1) < 1e-12);
  CHECK(std::abs(r1[2] - oracle::kResidualA2) < 1e-12);
  const auto r2 = residual_distribution(VocabDistribution({0.6, 0.2, 0.2}),
                                        VocabDistribution({0.2, 0.5, 0.3}));
  CHECK(std::abs(r2[0] - oracle::kResidualB0) < 1e-12);
  CHECK(std::abs(r2[1] - oracle::kResidualB1) < 1e-12);
  CHECK(std::abs(r2[2] - oracle::kResidualB2) < 1e-12);
  CHECK_THROWS_AS(residual_distribution(VocabDistribution({0.5, 0.5}), VocabDistribution({0.5, 0.5})),
                  Error);
}

TEST_CASE("verify examples") {
  const VocabDistribution x({0.5, 0.5}), y({0.8, 0.2});
  RandomStream rng(1, "verify");
  const auto acc = verify(x, y, TokenId{0}, rng);
  CHECK(acc.decision == Decision::ImmediateAccept);
  CHECK(acc.response == TokenId{0});
  CHECK(acc.beta == 0.0);
  CHECK_FALSE(acc.residual.has_value());

  const int n = 1'000'000;
  int rejected = 0;
  RandomStream mc(2, "verify-mc");
  for (int i = 0; i < n; ++i) {
    const auto o = verify(x, y, TokenId{1}, mc);
    CHECK(o.beta == doctest::Approx(oracle::kBetaDraft1).epsilon(1e-15));
    if (o.decision == Decision::Rejected) {
      ++rejected;
      REQUIRE(o.residual.has_value());
      CHECK(o.response == TokenId{0});  // residual is one-hot on token 0
    } else {
      CHECK(o.decision == Decision::ProbabilisticAccept);
      CHECK(o.response == TokenId{1});
    }
  }
  const double freq = static_cast<double>(rejected) / n;
  CHECK(freq >= 0.5985);
  CHECK(freq <= 0.6015);
  CHECK(std::abs(freq - oracle::kBetaDraft1) <= oracle::kBetaDraft1_3Sigma1e6);

  RandomStream eq(3, "eq");
  const VocabDistribution z({0.1, 0.2, 0.7});
  for (std::uint32_t d = 0; d < 3; ++d) {
    const auto o = verify(z, z, TokenId{d}, eq);
    CHECK(o.decision == Decision::ImmediateAccept);
    CHECK(o.response == TokenId{d});
  }
}

TEST_CASE("effective distribution equals target") {
  const auto e = effective_distribution(VocabDistribution({0.5, 0.5}), VocabDistribution({0.8, 0.2}));
  CHECK(std::abs(e[0] - oracle::kEffective0) < 1e-15);
  CHECK(std::abs(e[1] - oracle::kEffective1) < 1e-15);

  RandomStream rng(4, "eff");
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = dirichlet(rng, 8, 0.5);
    const auto y = dirichlet(rng, 8, 0.5);
    const auto eff = effective_distribution(x, y);
    for (std::size_t v = 0; v < 8; ++v) worst = std::max(worst, std::abs(eff[v] - y[v]));
    const auto self = effective_distribution(y, y);
    for (std::size_t v = 0; v < 8; ++v) CHECK(self[v] == y[v]);
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("decision strings round trip") {
  for (Decision d : {Decision::ImmediateAccept, Decision::ProbabilisticAccept, Decision::Rejected}) {
    CHECK(decision_from_string(to_string(d)) == d);
  }
  CHECK(is_accept(Decision::ProbabilisticAccept));
  CHECK_FALSE(is_accept(Decision::Rejected));
  CHECK_THROWS_AS(decision_from_string("maybe"), Error);
}
