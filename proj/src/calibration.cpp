#include "uhlm/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "uhlm/error.hpp"

namespace uhlm {

UncertaintyHistogram::UncertaintyHistogram(std::vector<double> bin_edges,
                                           std::vector<double> masses)
    : edges_(std::move(bin_edges)), masses_(std::move(masses)) {
  if (masses_.empty() || edges_.size() != masses_.size() + 1) {
    throw numerical_error("invalid histogram: need len(edges) == len(masses) + 1");
  }
  for (std::size_t i = 0; i + 1 < edges_.size(); ++i) {
    if (!(edges_[i] < edges_[i + 1])) {
      throw numerical_error("invalid histogram: edges must be strictly ascending");
    }
  }
  if (edges_.front() > 0.0 || edges_.back() < 1.0) {
    throw numerical_error("invalid histogram: edges must cover [0, 1]");
  }
  double total = 0.0;
  for (double m : masses_) {
    if (!(m >= 0.0)) throw numerical_error("invalid histogram: negative mass");
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw numerical_error("invalid histogram: masses must sum to 1");
  }
}

UncertaintyHistogram UncertaintyHistogram::from_samples(std::span<const double> u,
                                                        int bins) {
  if (bins < 2) throw numerical_error("histogram needs at least 2 bins");
  if (u.empty()) throw numerical_error("histogram needs at least one sample");
  const double width = 1.0 / (bins - 1);
  std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) edges[i] = (i - 0.5) * width;
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (double v : u) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw numerical_error("uncertainty sample outside [0, 1]");
    }
    const auto idx = static_cast<std::size_t>(
        std::clamp(static_cast<int>(std::floor(v / width + 0.5)), 0, bins - 1));
    counts[idx] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(u.size());
  return UncertaintyHistogram(std::move(edges), std::move(counts));
}

double UncertaintyHistogram::density(std::size_t bin) const {
  return masses_.at(bin) / (edges_[bin + 1] - edges_[bin]);
}

LinearFit fit_linear(std::span<const UncertaintyRejectionPair> pairs) {
  if (pairs.size() < 2) throw numerical_error("degenerate fit: need >= 2 points");
  const double n = static_cast<double>(pairs.size());
  double mu = 0.0, mb = 0.0;
  for (const auto& p : pairs) {
    mu += p.u;
    mb += p.beta;
  }
  mu /= n;
  mb /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : pairs) {
    sxx += (p.u - mu) * (p.u - mu);
    sxy += (p.u - mu) * (p.beta - mb);
  }
  if (!(sxx > 0.0)) throw numerical_error("degenerate fit: all u values identical");
  LinearFit fit;
  fit.a = sxy / sxx;
  fit.b = mb - fit.a * mu;
  return fit;
}

double estimate_delta(std::span<const DraftTargetPair> samples) {
  if (samples.empty()) throw numerical_error("cannot estimate delta from no samples");
  const auto below = std::count_if(samples.begin(), samples.end(),
                                   [](const DraftTargetPair& s) { return s.y_d < s.x_d; });
  return static_cast<double>(below) / static_cast<double>(samples.size());
}

Thresholds thresholds(double a, double b, double delta) {
  if (!(a > 0.0)) throw numerical_error("thresholds need a positive slope a");
  return {-b / a, (delta - b) / a};
}

double expected_risk(double a, double b, const UncertaintyHistogram& hist,
                     double u_lo, double u_hi) {
  if (!(a > 0.0)) throw numerical_error("expected risk needs a positive slope a");
  const auto& e = hist.bin_edges();
  const double zero_crossing = -b / a;
  double risk = 0.0;
  for (std::size_t i = 0; i < hist.bins(); ++i) {
    const double lo = std::max({u_lo, e[i], zero_crossing});
    const double hi = std::min(u_hi, e[i + 1]);
    if (!(hi > lo)) continue;
    // Closed-form integral of the (non-negative) line over [lo, hi].
    const double line = 0.5 * a * (hi * hi - lo * lo) + b * (hi - lo);
    risk += line * hist.density(i);
  }
  return risk;
}

double risk_upper_bound(double a, double b, const UncertaintyHistogram& hist,
                        double u_lo, double u_hi) {
  if (!(a > 0.0)) throw numerical_error("risk bound needs a positive slope a");
  if (!(u_hi > u_lo)) return 0.0;
  const double top = a * u_hi + b;
  const double bottom = a * u_lo + b;
  const double line_sq = (top * top * top - bottom * bottom * bottom) / (3.0 * a);

  const auto& e = hist.bin_edges();
  double dens_sq = 0.0;
  for (std::size_t i = 0; i < hist.bins(); ++i) {
    const double overlap = std::min(u_hi, e[i + 1]) - std::max(u_lo, e[i]);
    if (overlap > 0.0) dens_sq += hist.density(i) * hist.density(i) * overlap;
  }
  return std::sqrt(line_sq) * std::sqrt(dens_sq);
}

CalibrationModel::CalibrationModel(LinearFit fit, double delta,
                                   UncertaintyHistogram density)
    : fit_(fit), delta_(delta), density_(std::move(density)) {
  if (!(fit_.a >= kMinSlope)) {
    throw numerical_error(
        "calibration rejected: fitted slope a = " + std::to_string(fit_.a) +
        " is not positive (flat or decreasing), uncertainty does not predict rejection");
  }
  if (!(delta_ >= 0.0 && delta_ <= 1.0)) {
    throw numerical_error("calibration rejected: delta outside [0, 1]");
  }
  th_ = thresholds(fit_.a, fit_.b, delta_);
}

CalibrationModel CalibrationModel::fit(std::span<const CalibrationSample> samples,
                                       int bins) {
  std::vector<UncertaintyRejectionPair> ub;
  std::vector<DraftTargetPair> xy;
  std::vector<double> us;
  ub.reserve(samples.size());
  xy.reserve(samples.size());
  us.reserve(samples.size());
  for (const auto& s : samples) {
    ub.push_back({s.u, s.beta});
    xy.push_back({s.x_d, s.y_d});
    us.push_back(s.u);
  }
  return CalibrationModel(fit_linear(ub), estimate_delta(xy),
                          UncertaintyHistogram::from_samples(us, bins));
}

double CalibrationModel::risk() const {
  return expected_risk(fit_.a, fit_.b, density_, th_.averse, th_.prone);
}

double CalibrationModel::risk_bound() const {
  return risk_upper_bound(fit_.a, fit_.b, density_, th_.averse, th_.prone);
}

nlohmann::json CalibrationModel::to_json() const {
  return {
      {"a", fit_.a},
      {"b", fit_.b},
      {"delta", delta_},
      {"u_th_averse", th_.averse},
      {"u_th_prone", th_.prone},
      {"bin_edges", density_.bin_edges()},
      {"masses", density_.masses()},
      {"expected_risk", risk()},
      {"risk_upper_bound", risk_bound()},
  };
}

CalibrationModel CalibrationModel::from_json(const nlohmann::json& j) {
  try {
    CalibrationModel m({j.at("a").get<double>(), j.at("b").get<double>()},
                       j.at("delta").get<double>(),
                       UncertaintyHistogram(j.at("bin_edges").get<std::vector<double>>(),
                                            j.at("masses").get<std::vector<double>>()));
    // Stored thresholds are derived data; a mismatch means the file was edited.
    for (const char* key : {"u_th_averse", "u_th_prone"}) {
      if (!j.contains(key)) continue;
      const double stored = j.at(key).get<double>();
      const double derived =
          std::string(key) == "u_th_averse" ? m.u_th_averse() : m.u_th_prone();
      if (std::abs(stored - derived) > 1e-9) {
        throw numerical_error(std::string("calibration file: ") + key +
                              " inconsistent with a, b, delta");
      }
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("malformed calibration document: ") + e.what());
  }
}

CalibrationModel CalibrationModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open calibration file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("calibration file " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

}  // namespace uhlm
