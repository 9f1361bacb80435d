#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracle_values.hpp"
#include "uhlm/error.hpp"
#include "uhlm/uncertainty.hpp"

using namespace uhlm;

TEST_CASE("perturbation config validation") {
  CHECK_NOTHROW(PerturbationConfig{}.validate());
  CHECK_THROWS_AS((PerturbationConfig{0, 2.0, 1e-3}.validate()), Error);
  CHECK_THROWS_AS((PerturbationConfig{20, 1e-4, 1e-3}.validate()), Error);
}

TEST_CASE("sample_temperatures range and mean") {
  PerturbationConfig narrow{1, 0.5, 0.5 - 1e-9};
  RandomStream rng(1, "theta");
  for (int i = 0; i < 100; ++i) {
    const auto t = sample_temperatures(narrow, rng);
    REQUIRE(t.size() == 1);
    CHECK(t[0] >= narrow.theta_min);
    CHECK(t[0] <= narrow.theta_max);
  }

  PerturbationConfig big{100000, 2.0, kMinTemperature};
  RandomStream r(2, "theta-mean");
  const auto t = sample_temperatures(big, r);
  double s = 0.0;
  for (double v : t) s += v;
  const double mean = s / static_cast<double>(t.size());
  CHECK(mean >= 0.99 * oracle::kThetaMean);
  CHECK(mean <= 1.01 * oracle::kThetaMean);

  RandomStream a(3, "same"), b(3, "same");
  CHECK(sample_temperatures(PerturbationConfig{}, a) == sample_temperatures(PerturbationConfig{}, b));
}

TEST_CASE("measure_uncertainty examples") {
  const PerturbationConfig cfg;
  RandomStream rng(4, "u");
  const auto sharp = measure_uncertainty(LogitVector({100.0, 0.0, 0.0}), TokenId{0}, cfg, rng);
  CHECK(sharp.u == 0.0);
  CHECK(sharp.mismatches == 0);

  // Under the uniform law on 32000 tokens, u < 1 needs a collision with d.
  const LogitVector flat(std::vector<double>(32000, 0.0));
  int below_one = 0;
  const int runs = 200;
  for (int i = 0; i < runs; ++i) {
    RandomStream r(100 + i, "flat");
    const auto est = measure_uncertainty(flat, TokenId{17}, cfg, r);
    below_one += est.u < 1.0;
  }
  // Expected count is at most runs * 20/32000 = 0.125.
  CHECK(below_one <= 2);
  CHECK(static_cast<double>(below_one) / runs <= 0.01 + oracle::kUniformCollisionBound);

  // u is the ratio mismatches / K on the lattice.
  RandomStream mid(5, "mid");
  const auto est = measure_uncertainty(LogitVector({0.0, 0.0}), TokenId{0}, cfg, mid);
  CHECK(est.u == doctest::Approx(est.mismatches / 20.0));

  RandomStream a(6, "det"), b(6, "det");
  const LogitVector z({0.5, 0.2, -0.3});
  CHECK(measure_uncertainty(z, TokenId{1}, cfg, a).mismatches ==
        measure_uncertainty(z, TokenId{1}, cfg, b).mismatches);
}

TEST_CASE("seven mismatches of twenty give 0.35") {
  const UncertaintyEstimate e{7 / 20.0, 7};
  CHECK(e.u == doctest::Approx(0.35).epsilon(1e-15));
}

TEST_CASE("skip_decision boundary") {
  CHECK(skip_decision(0.2, 0.431) == 0);
  CHECK(skip_decision(0.5, 0.431) == 1);
  CHECK(skip_decision(0.431, 0.431) == 0);
  CHECK(skip_decision(0.0, -0.1) == 1);
  CHECK(skip_decision(1.0, 1.0) == 0);
}
