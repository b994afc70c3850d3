#pragma once

// Empirical measures of outcome records, distances to model distributions,
// i.i.d. resampling baselines, and the a-posteriori phase estimate from the
// outcome average.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "homsim/common.hpp"
#include "homsim/homodyne.hpp"
#include "homsim/phasebayes.hpp"

namespace homsim {

class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  explicit EmpiricalMeasure(const QuadratureGrid& grid)
      : grid_(grid), counts_(grid.size(), 0) {}

  const QuadratureGrid& grid() const { return grid_; }
  long long total() const { return total_; }
  long long count(int dn) const { return counts_[grid_.index_of(dn)]; }
  const std::vector<long long>& counts() const { return counts_; }

  void add(int dn) {
    if (!grid_.contains(dn))
      throw GridMismatchError("outcome dn=" + std::to_string(dn) + " outside grid");
    ++counts_[grid_.index_of(dn)];
    ++total_;
  }

  void merge(const EmpiricalMeasure& other) {
    if (!(grid_ == other.grid_)) throw GridMismatchError("cannot merge across grids");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    total_ += other.total_;
  }

  // relative frequencies k/M per bin
  Eigen::VectorXd frequencies() const {
    Eigen::VectorXd f(counts_.size());
    for (std::size_t i = 0; i < counts_.size(); ++i)
      f[i] = total_ > 0 ? double(counts_[i]) / double(total_) : 0.0;
    return f;
  }

  // frequencies / dx, comparable to a model density
  Eigen::VectorXd density() const { return frequencies() / grid_.dx(); }

 private:
  QuadratureGrid grid_;
  std::vector<long long> counts_;
  long long total_ = 0;
};

inline EmpiricalMeasure empirical_measure(const DetectionRecord& record,
                                          const QuadratureGrid& grid) {
  EmpiricalMeasure m(grid);
  for (int dn : record.outcomes) m.add(dn);
  return m;
}

struct DistanceReport {
  double tv = 0.0;            // total variation, in [0, 1]
  double ks = 0.0;            // Kolmogorov-Smirnov statistic, in [0, 1]
  Eigen::VectorXd residuals;  // per-bin frequency - model probability
};

inline DistanceReport distance(const EmpiricalMeasure& emp,
                               const QuadratureDistribution& model) {
  if (!(emp.grid() == model.grid)) throw GridMismatchError("empirical/model grid mismatch");
  DistanceReport out;
  out.residuals = emp.frequencies() - model.prob;
  out.tv = 0.5 * out.residuals.cwiseAbs().sum();
  double cum = 0.0;
  for (int i = 0; i < out.residuals.size(); ++i) {
    cum += out.residuals[i];
    out.ks = std::max(out.ks, std::fabs(cum));
  }
  return out;
}

// Draws M i.i.d. outcomes from a model distribution (the resampling oracle for
// empirical-measure baselines; independent of the sequential machinery).
inline EmpiricalMeasure iid_sample(const QuadratureDistribution& model, long long M,
                                   Rng& rng) {
  std::vector<double> cdf(model.prob.size());
  double run = 0.0;
  for (int i = 0; i < model.prob.size(); ++i) {
    run += model.prob[i];
    cdf[i] = run;
  }
  EmpiricalMeasure out(model.grid);
  for (long long i = 0; i < M; ++i) {
    const std::size_t idx = sample_from_cdf(cdf, rng.uniform());
    out.add(model.grid.dn_min + static_cast<int>(idx));
  }
  return out;
}

// TV distances of n_resamples i.i.d. M-samples against their own model,
// sorted ascending.  percentile(v, 0.95) of this is the acceptance baseline.
inline std::vector<double> resampling_tv_baseline(const QuadratureDistribution& model,
                                                  long long M, int n_resamples,
                                                  std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> tvs;
  tvs.reserve(n_resamples);
  for (int r = 0; r < n_resamples; ++r)
    tvs.push_back(distance(iid_sample(model, M, rng), model).tv);
  std::sort(tvs.begin(), tvs.end());
  return tvs;
}

inline double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw ConfigError("percentile of empty sample");
  const double pos = q * (sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - lo;
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

// Two-sample KS statistic between empirical measures on a common grid.
inline double two_sample_ks(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
  if (!(a.grid() == b.grid())) throw GridMismatchError("KS across different grids");
  const Eigen::VectorXd fa = a.frequencies(), fb = b.frequencies();
  double cum = 0.0, d = 0.0;
  for (int i = 0; i < fa.size(); ++i) {
    cum += fa[i] - fb[i];
    d = std::max(d, std::fabs(cum));
  }
  return d;
}

// Rejection threshold for the two-sample KS test at significance level alpha.
inline double two_sample_ks_threshold(long long n, long long m, double alpha) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt(double(n + m) / (double(n) * double(m)));
}

struct PhasePair {
  double phi_plus = 0.0;   // arccos branch in [0, pi]
  double phi_minus = 0.0;  // 2pi - phi_plus
  bool clamped = false;    // |xbar| exceeded sqrt(2) beta e^{-r}
};

// phi_0 = +-arccos(xbar / (sqrt(2) beta e^{-r})), the a-posteriori phase pair
// estimated from the outcome average.  Overshoot up to clamp_tolerance
// (relative) is treated as finite-M fluctuation and clamped.
inline PhasePair estimate_phase_from_mean(double xbar, double beta, double r,
                                          double clamp_tolerance = 0.05) {
  const double scale = std::sqrt(2.0) * beta * std::exp(-r);
  if (scale <= 0.0) throw ConfigError("quadrature amplitude must be positive");
  double ratio = xbar / scale;
  PhasePair out;
  if (std::fabs(ratio) > 1.0) {
    if (std::fabs(ratio) > 1.0 + clamp_tolerance)
      throw ToleranceError("outcome mean " + std::to_string(xbar) +
                           " far outside the modeled range " + std::to_string(scale));
    ratio = ratio > 0.0 ? 1.0 : -1.0;
    out.clamped = true;
  }
  out.phi_plus = std::acos(ratio);
  out.phi_minus = wrap_angle(-out.phi_plus);
  return out;
}

}  // namespace homsim
