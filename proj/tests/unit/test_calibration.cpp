#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracle_values.hpp"
#include "uhlm/calibration.hpp"
#include "uhlm/error.hpp"
#include "uhlm/random_stream.hpp"

using namespace uhlm;

namespace {

UncertaintyHistogram uniform_hist(int bins) {
  std::vector<double> edges, masses;
  for (int i = 0; i <= bins; ++i) edges.push_back(static_cast<double>(i) / bins);
  masses.assign(bins, 1.0 / bins);
  return UncertaintyHistogram(edges, masses);
}

UncertaintyHistogram random_hist(RandomStream& rng) {
  std::vector<double> u(200);
  for (auto& v : u) v = std::floor(rng.uniform() * 21.0) / 20.0;
  return UncertaintyHistogram::from_samples(u);
}

}  // namespace

TEST_CASE("fit_linear examples") {
  std::vector<UncertaintyRejectionPair> exact;
  for (int i = 0; i <= 20; ++i) exact.push_back({i / 20.0, 0.82 * (i / 20.0) - 0.06});
  const auto f = fit_linear(exact);
  CHECK(f.a == doctest::Approx(0.82).epsilon(1e-12));
  CHECK(f.b == doctest::Approx(-0.06).epsilon(1e-12));

  const std::vector<UncertaintyRejectionPair> id{{0, 0}, {1, 1}};
  CHECK(fit_linear(id).a == doctest::Approx(1.0));
  CHECK(std::abs(fit_linear(id).b) < 1e-15);

  const std::vector<UncertaintyRejectionPair> flat{{0, 0.1}, {0.5, 0.1}, {1, 0.1}};
  const auto ff = fit_linear(flat);
  CHECK(std::abs(ff.a) < 1e-15);
  CHECK(ff.b == doctest::Approx(0.1));
  CHECK_THROWS_WITH_AS(CalibrationModel(ff, 0.5, uniform_hist(10)), doctest::Contains("a"), Error);

  const std::vector<UncertaintyRejectionPair> same_u{{0.3, 0.1}, {0.3, 0.2}};
  CHECK_THROWS_AS(fit_linear(same_u), Error);
}

TEST_CASE("estimate_delta examples") {
  const std::vector<DraftTargetPair> none{{0.2, 0.3}, {0.4, 0.4}};
  CHECK(estimate_delta(none) == 0.0);
  const std::vector<DraftTargetPair> half{{0.5, 0.2}, {0.5, 0.8}};
  CHECK(estimate_delta(half) == 0.5);
}

TEST_CASE("threshold examples") {
  const auto t = thresholds(0.82, -0.06, 0.301);
  CHECK(std::abs(t.averse - oracle::kAverse) < 1e-6);
  CHECK(std::abs(t.prone - oracle::kProne) < 1e-6);
  CHECK(std::abs(t.averse - 0.073171) < 1e-6);
  CHECK(std::abs(t.prone - 0.440244) < 1e-6);
  const auto id = thresholds(1.0, 0.0, 0.5);
  CHECK(id.averse == 0.0);
  CHECK(id.prone == 0.5);
  CHECK_THROWS_AS(thresholds(0.0, 0.1, 0.5), Error);
}

TEST_CASE("expected risk and bound examples") {
  const auto h = uniform_hist(10);
  CHECK(std::abs(expected_risk(1.0, 0.0, h, 0.0, 0.3) - oracle::kRiskUniform) < 1e-12);
  CHECK(expected_risk(1.0, 0.0, h, 0.2, 0.2) == 0.0);
  CHECK(std::abs(risk_upper_bound(1.0, 0.0, h, 0.0, 0.3) - oracle::kBoundUniform) < 1e-6);
  CHECK(std::abs(risk_upper_bound(1.0, 0.0, h, 0.0, 0.3) - 0.051961) < 1e-6);
  // Below the zero crossing the clamped line contributes nothing.
  CHECK(expected_risk(0.82, -0.06, h, 0.0, 0.06 / 0.82) == 0.0);
}

TEST_CASE("risk bound dominates expected risk") {
  RandomStream rng(7, "holder");
  for (int i = 0; i < 1000; ++i) {
    const auto h = random_hist(rng);
    const double a = rng.uniform(0.05, 2.0);
    const double b = rng.uniform(-0.5, 0.3);
    double lo = rng.uniform(-0.1, 1.1), hi = rng.uniform(-0.1, 1.1);
    if (lo > hi) std::swap(lo, hi);
    const double r = expected_risk(a, b, h, lo, hi);
    const double ub = risk_upper_bound(a, b, h, lo, hi);
    CHECK(r >= 0.0);
    CHECK(ub >= r - 1e-15);
  }
}

TEST_CASE("histogram construction") {
  const std::vector<double> u{0.0, 0.0, 0.05, 1.0};
  const auto h = UncertaintyHistogram::from_samples(u);
  REQUIRE(h.bins() == 21);
  CHECK(h.bin_edges().front() == doctest::Approx(-0.025));
  CHECK(h.bin_edges().back() == doctest::Approx(1.025));
  CHECK(h.masses()[0] == doctest::Approx(0.5));
  CHECK(h.masses()[1] == doctest::Approx(0.25));
  CHECK(h.masses()[20] == doctest::Approx(0.25));
  CHECK(h.density(0) == doctest::Approx(10.0));
  CHECK_THROWS_AS(UncertaintyHistogram({0.0, 0.5}, {1.0}), Error);
  CHECK_THROWS_AS(UncertaintyHistogram({0.0, 1.0}, {0.7}), Error);
  CHECK_THROWS_AS(UncertaintyHistogram::from_samples(std::vector<double>{1.5}), Error);
}

TEST_CASE("calibration model fit and json round trip") {
  std::vector<CalibrationSample> s;
  RandomStream rng(9, "cal");
  for (int i = 0; i < 500; ++i) {
    const double u = std::floor(rng.uniform() * 21.0) / 20.0;
    const double beta = std::max(0.82 * u - 0.06, 0.0);
    const double x = rng.uniform(0.1, 1.0);
    s.push_back({u, beta, x, x * (1.0 - beta)});
  }
  const auto m = CalibrationModel::fit(s);
  CHECK(m.a() > 0.0);
  CHECK(m.u_th_averse() <= m.u_th_prone());
  CHECK(m.risk_bound() >= m.risk());

  const auto j = m.to_json();
  for (const char* key : {"a", "b", "delta", "u_th_averse", "u_th_prone", "bin_edges", "masses",
                          "expected_risk", "risk_upper_bound"}) {
    CHECK(j.contains(key));
  }
  const auto back = CalibrationModel::from_json(j);
  CHECK(back.a() == m.a());
  CHECK(back.u_th_prone() == m.u_th_prone());

  auto edited = j;
  edited["u_th_prone"] = 0.9;
  CHECK_THROWS_AS(CalibrationModel::from_json(edited), Error);
  CHECK_THROWS_AS(CalibrationModel::from_json(nlohmann::json{{"a", 1.0}}), Error);
}

TEST_CASE("all-zero rejection data is rejected") {
  std::vector<CalibrationSample> s;
  for (int i = 0; i <= 20; ++i) s.push_back({i / 20.0, 0.0, 0.3, 0.3});
  CHECK_THROWS_AS(CalibrationModel::fit(s), Error);
}
