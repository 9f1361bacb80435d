#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace uhlm {

/// Piecewise-constant empirical density of the uncertainty score.
class UncertaintyHistogram {
 public:
  /// Default bin count: one bin per point of the K = 20 uncertainty lattice.
  static constexpr int kDefaultBins = 21;

  UncertaintyHistogram(std::vector<double> bin_edges, std::vector<double> masses);

  /// `bins` equal-width bins centred on {0, 1/(bins-1), ..., 1}, so the
  /// outer edges sit half a bin outside [0, 1].
  static UncertaintyHistogram from_samples(std::span<const double> u,
                                           int bins = kDefaultBins);

  const std::vector<double>& bin_edges() const noexcept { return edges_; }
  const std::vector<double>& masses() const noexcept { return masses_; }
  std::size_t bins() const noexcept { return masses_.size(); }
  double density(std::size_t bin) const;

 private:
  std::vector<double> edges_;
  std::vector<double> masses_;
};

struct LinearFit {
  double a = 0.0;  // slope
  double b = 0.0;  // intercept
};

struct UncertaintyRejectionPair {
  double u;
  double beta;
};

struct DraftTargetPair {
  double x_d;
  double y_d;
};

/// Ordinary least squares of beta on u.
LinearFit fit_linear(std::span<const UncertaintyRejectionPair> pairs);

/// Fraction of samples with y_d < x_d.
double estimate_delta(std::span<const DraftTargetPair> samples);

struct Thresholds {
  double averse;  // -b/a: skip only tokens predicted to be accepted outright
  double prone;   // (delta - b)/a: also skip probable accepts
};

Thresholds thresholds(double a, double b, double delta);

/// Integral over [u_lo, u_hi] of max(a*u + b, 0) against the histogram
/// density. Exact for the piecewise-constant density.
double expected_risk(double a, double b, const UncertaintyHistogram& hist,
                     double u_lo, double u_hi);

/// Cauchy-Schwarz bound sqrt(int (a*u+b)^2 du) * sqrt(int f(u)^2 du) on
/// [u_lo, u_hi].
double risk_upper_bound(double a, double b, const UncertaintyHistogram& hist,
                        double u_lo, double u_hi);

struct CalibrationSample {
  double u;
  double beta;
  double x_d;
  double y_d;
};

class CalibrationModel {
 public:
  /// Smallest usable slope. A flatter fit means uncertainty carries no
  /// information about rejection; exact zeros rarely survive rounding.
  static constexpr double kMinSlope = 1e-6;

  /// Validates a >= kMinSlope and derives both thresholds.
  CalibrationModel(LinearFit fit, double delta, UncertaintyHistogram density);

  /// Builds the model from transmitted-round samples.
  static CalibrationModel fit(std::span<const CalibrationSample> samples,
                              int bins = UncertaintyHistogram::kDefaultBins);

  double a() const noexcept { return fit_.a; }
  double b() const noexcept { return fit_.b; }
  double delta() const noexcept { return delta_; }
  double u_th_averse() const noexcept { return th_.averse; }
  double u_th_prone() const noexcept { return th_.prone; }
  const UncertaintyHistogram& density() const noexcept { return density_; }

  /// Expected rejection risk between the two thresholds, and its bound.
  double risk() const;
  double risk_bound() const;

  nlohmann::json to_json() const;
  static CalibrationModel from_json(const nlohmann::json& j);
  static CalibrationModel load(const std::string& path);

 private:
  LinearFit fit_;
  double delta_;
  Thresholds th_;
  UncertaintyHistogram density_;
};

}  // namespace uhlm
