#pragma once

// Discretized phase distributions, Bayesian updates over the LO phase,
// sequential sampling of outcome sequences from the mixture-of-i.i.d. joint
// law, and localization diagnostics.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "homsim/common.hpp"
#include "homsim/fock.hpp"
#include "homsim/homodyne.hpp"

namespace homsim {

// P(phi) on the uniform grid phi_j = 2pi j / J, stored as log densities w.r.t.
// dphi/2pi, so the uniform distribution has log_weights = 0 and
// sum_j exp(log_weights_j) / J = 1.
class PhaseDistribution {
 public:
  PhaseDistribution() = default;

  static PhaseDistribution uniform(int J) {
    PhaseDistribution p;
    p.lw_ = Eigen::VectorXd::Zero(J);
    return p;
  }

  // Tabulated density values (any positive scale); normalized on construction.
  static PhaseDistribution from_weights(const Eigen::VectorXd& w) {
    if ((w.array() < 0.0).any()) throw ConfigError("phase weights must be >= 0");
    if (w.sum() <= 0.0) throw ConfigError("phase weights must not all vanish");
    PhaseDistribution p;
    p.lw_ = w.array().max(0.0).log().matrix();
    p.normalize();
    return p;
  }

  static PhaseDistribution from_log_weights(Eigen::VectorXd lw) {
    PhaseDistribution p;
    p.lw_ = std::move(lw);
    p.normalize();
    return p;
  }

  int grid_size() const { return static_cast<int>(lw_.size()); }
  double phase(int j) const { return kTwoPi * j / grid_size(); }
  const Eigen::VectorXd& log_weights() const { return lw_; }
  Eigen::VectorXd weights() const { return lw_.array().exp().matrix(); }

  void check_normalized(double tol = 1e-10) const {
    const double s = weights().sum() / grid_size();
    if (std::fabs(s - 1.0) > tol)
      throw ToleranceError("phase distribution mass " + std::to_string(s));
  }

  // P'(phi) = P(phi - steps * 2pi/J): circular shift on the grid.
  PhaseDistribution shifted(int steps) const {
    const int J = grid_size();
    steps = ((steps % J) + J) % J;
    Eigen::VectorXd out(J);
    for (int j = 0; j < J; ++j) out[j] = lw_[(j - steps + J) % J];
    PhaseDistribution p;
    p.lw_ = std::move(out);
    return p;
  }

  // P'(phi) = P(-phi)
  PhaseDistribution reflected() const {
    const int J = grid_size();
    Eigen::VectorXd out(J);
    for (int j = 0; j < J; ++j) out[j] = lw_[(J - j) % J];
    PhaseDistribution p;
    p.lw_ = std::move(out);
    return p;
  }

  CircularStats stats() const {
    const Eigen::VectorXd w = weights();
    return circular_stats(std::span<const double>(w.data(), w.size()));
  }

  // Fourier coefficients w_d = (1/J) sum_j P_j e^{i d phi_j}, d = 0..d_max.
  Eigen::VectorXcd fourier_weights(int d_max) const {
    const int J = grid_size();
    const Eigen::VectorXd w = weights();
    Eigen::VectorXcd out(d_max + 1);
    for (int d = 0; d <= d_max; ++d) {
      cd s = 0.0;
      for (int j = 0; j < J; ++j) s += w[j] * std::polar(1.0, d * phase(j));
      out[d] = s / double(J);
    }
    return out;
  }

 private:
  void normalize() {
    const double lz =
        log_sum_exp(std::span<const double>(lw_.data(), lw_.size())) - std::log(double(grid_size()));
    if (!std::isfinite(lz)) throw ToleranceError("phase distribution has zero mass");
    lw_.array() -= lz;
  }

  Eigen::VectorXd lw_;
};

// Posterior ~ prior * likelihood, renormalized on the grid.
inline PhaseDistribution bayes_update(const PhaseDistribution& prior,
                                      const Eigen::VectorXd& likelihood) {
  if (likelihood.size() != prior.grid_size())
    throw GridMismatchError("likelihood grid does not match prior");
  if ((likelihood.array() < 0.0).any()) throw ConfigError("likelihood must be >= 0");
  if (likelihood.maxCoeff() <= 0.0)
    throw ToleranceError("all-zero likelihood: outcome outside modeled support");
  Eigen::VectorXd lw = prior.log_weights();
  for (int j = 0; j < lw.size(); ++j)
    lw[j] += likelihood[j] > 0.0 ? std::log(likelihood[j])
                                 : -std::numeric_limits<double>::infinity();
  return PhaseDistribution::from_log_weights(std::move(lw));
}

// q_{phi_j + offset}(dn) for every grid phase, plus the per-phase outcome CDFs
// and log tables the sequential sampler needs.  Built once per (signal, alpha,
// block offset); the heavy POVM contraction is shared through the series.
// Likelihood slices over the phase grid are stored contiguously (J x ndn):
// the sampler touches one dn column per step.
class PhaseLikelihoodTable {
 public:
  PhaseLikelihoodTable(const QuadraturePhaseSeries& series, int J, double offset = 0.0)
      : grid_(series.grid()), J_(J), offset_(offset) {
    const int nd = grid_.size();
    q_by_phase_.resize(J, nd);
    for (int j = 0; j < J; ++j)
      q_by_phase_.row(j) =
          series.eval(kTwoPi * j / J + offset - series.base_phase()).transpose();
    log_q_by_phase_ = q_by_phase_.array().max(0.0).log().matrix();
  }

  const QuadratureGrid& grid() const { return grid_; }
  int grid_size() const { return J_; }
  double offset() const { return offset_; }

  double probability(int j, int dn) const { return q_by_phase_(j, grid_.index_of(dn)); }

  // likelihood over grid phases for outcome dn (contiguous column views)
  auto likelihood_row(int dn) const { return q_by_phase_.col(grid_.index_of(dn)); }
  auto log_likelihood_row(int dn) const { return log_q_by_phase_.col(grid_.index_of(dn)); }

  // outcome mixture sum_j w_j q_{phi_j}(dn), up to the caller's weight scale
  Eigen::VectorXd mixture(const Eigen::VectorXd& w) const {
    return q_by_phase_.transpose() * w;
  }
  void mixture_into(const Eigen::VectorXd& w, Eigen::VectorXd& out) const {
    out.noalias() = q_by_phase_.transpose() * w;
  }

 private:
  QuadratureGrid grid_;
  int J_;
  double offset_;
  Eigen::MatrixXd q_by_phase_;      // (J x ndn)
  Eigen::MatrixXd log_q_by_phase_;  // log of q, -inf on zero bins
};

struct DetectionRecord {
  std::vector<int> outcomes;  // photon-number differences dn_i
  std::uint64_t seed = 0;
  double alpha = 0.0;
  std::string signal;
  std::string prior;
  QuadratureGrid grid;

  double x(std::size_t i) const { return grid.x(outcomes[i]); }
  double mean_x() const {
    double s = 0.0;
    for (int dn : outcomes) s += dn;
    return outcomes.empty() ? 0.0 : grid.x(0) + s / double(outcomes.size()) * grid.dx();
  }
};

struct PosteriorTrace {
  std::vector<double> circ_mean;  // after each detection, steps 1..M
  std::vector<double> circ_std;
  std::map<int, PhaseDistribution> snapshots;  // requested steps; always holds M

  const PhaseDistribution& final_posterior() const {
    if (snapshots.empty()) throw ConfigError("trace holds no posterior snapshots");
    return snapshots.rbegin()->second;
  }
};

// Sequential sampler for the mixture of i.i.d.'s: outcome i is drawn by
// inverse CDF from p(x_i | x_1..x_{i-1}) = (1/J) sum_j w_j q_{phi_j}(x_i),
// and the posterior is updated after every draw.  Log weights carry the exact
// posterior; a rescaled linear copy drives the mixture evaluation.
class SequentialSampler {
 public:
  SequentialSampler(const PhaseLikelihoodTable* table, const PhaseDistribution& prior)
      : table_(table), lw_(prior.log_weights()), J_(prior.grid_size()) {
    if (table_->grid_size() != J_) throw GridMismatchError("table grid does not match prior");
    cos_.resize(J_);
    sin_.resize(J_);
    for (int j = 0; j < J_; ++j) {
      cos_[j] = std::cos(kTwoPi * j / J_);
      sin_[j] = std::sin(kTwoPi * j / J_);
    }
    refresh_linear();
  }

  void set_table(const PhaseLikelihoodTable* table) {
    if (table->grid_size() != J_) throw GridMismatchError("table grid does not match prior");
    table_ = table;
  }

  // Draws one outcome, updates the posterior, and returns (dn, conditional
  // probability of that dn under the pre-update mixture).  On an exact CDF
  // boundary the lower dn wins.
  std::pair<int, double> step(Rng& rng) {
    mix_.resize(table_->grid().size());
    table_->mixture_into(w_, mix_);
    cdf_.resize(mix_.size());
    double run = 0.0;
    for (int i = 0; i < mix_.size(); ++i) {
      run += mix_[i];
      cdf_[i] = run;
    }
    const int idx = static_cast<int>(
        sample_from_cdf(std::span<const double>(cdf_.data(), cdf_.size()), rng.uniform()));
    const int dn = table_->grid().dn_min + idx;

    // conditional under the posterior density measure (1/J) sum w_j q_j; the
    // weight normalization sum_j w_j / J cancels the 1/J
    const double cond = mix_[idx] / w_.sum();
    lw_ += table_->log_likelihood_row(dn);
    const double shift = lw_.maxCoeff();
    lw_.array() -= shift;  // running renormalization; exact normalization on export
    refresh_linear();
    return {dn, cond};
  }

  PhaseDistribution posterior() const { return PhaseDistribution::from_log_weights(lw_); }

  CircularStats stats() const {
    double zr = 0.0, zi = 0.0, tot = 0.0;
    for (int j = 0; j < J_; ++j) {
      zr += w_[j] * cos_[j];
      zi += w_[j] * sin_[j];
      tot += w_[j];
    }
    CircularStats out;
    const double r = std::hypot(zr, zi) / tot;
    out.mean = wrap_angle(std::atan2(zi, zr));
    out.resultant = r;
    out.stddev = r > 0.0 ? std::sqrt(std::max(0.0, -2.0 * std::log(r)))
                         : std::numeric_limits<double>::infinity();
    return out;
  }

 private:
  // linear weights for the mixture evaluation; log weights far below the peak
  // are flushed to an exact zero so the hot loops never touch subnormals
  void refresh_linear() {
    const double shift = lw_.maxCoeff();
    w_ = ((lw_.array() - shift) < -700.0)
             .select(-1000.0, lw_.array() - shift)
             .exp()
             .matrix();
  }

  const PhaseLikelihoodTable* table_;
  Eigen::VectorXd lw_;
  Eigen::VectorXd w_;
  Eigen::VectorXd mix_;
  Eigen::VectorXd cdf_;
  Eigen::VectorXd cos_, sin_;
  int J_;
};

struct SampleOptions {
  double mass_tolerance = 1e-10;
  double x_span = 0.0;                // dn window hint (see default_x_span)
  std::vector<int> snapshot_steps{};  // full posteriors to keep; M is always kept
  bool record_trace = true;
  TruncationPolicy policy{};
};

struct SequentialRun {
  DetectionRecord record;
  PosteriorTrace trace;
};

// Runs M sequential detections against a prebuilt likelihood table.
inline SequentialRun run_sequential(const PhaseLikelihoodTable& table,
                                    const PhaseDistribution& prior, int M,
                                    std::uint64_t seed, const SampleOptions& opt = {}) {
  if (M < 1) throw ConfigError("M must be >= 1");
  SequentialSampler sampler(&table, prior);
  Rng rng(seed);
  SequentialRun out;
  out.record.seed = seed;
  out.record.grid = table.grid();
  out.record.outcomes.reserve(M);
  if (opt.record_trace) {
    out.trace.circ_mean.reserve(M);
    out.trace.circ_std.reserve(M);
  }
  std::vector<int> snaps = opt.snapshot_steps;
  snaps.push_back(M);
  std::sort(snaps.begin(), snaps.end());
  for (int i = 1; i <= M; ++i) {
    out.record.outcomes.push_back(sampler.step(rng).first);
    if (opt.record_trace) {
      const CircularStats st = sampler.stats();
      out.trace.circ_mean.push_back(st.mean);
      out.trace.circ_std.push_back(st.stddev);
    }
    if (std::binary_search(snaps.begin(), snaps.end(), i))
      out.trace.snapshots.emplace(i, sampler.posterior());
  }
  return out;
}

// Convenience entry point: builds POVM and table for (signal, alpha) and runs.
inline SequentialRun sample_sequence(const DensityOperator& signal, double alpha,
                                     const PhaseDistribution& prior, int M,
                                     std::uint64_t seed, const SampleOptions& opt = {}) {
  const BeamSplitterPOVM povm =
      build_povm(alpha, 0.0, signal.cutoff(), opt.mass_tolerance, opt.x_span, opt.policy);
  const QuadraturePhaseSeries series(signal, povm);
  const PhaseLikelihoodTable table(series, prior.grid_size());
  return run_sequential(table, prior, M, seed, opt);
}

// log p(x_1..x_M) = log sum_j (w_j / J) prod_i q_{phi_j}(x_i), via log-sum-exp.
inline double joint_log_probability(const DetectionRecord& record,
                                    const PhaseDistribution& prior,
                                    const PhaseLikelihoodTable& table) {
  Eigen::VectorXd lw = prior.log_weights();
  for (int dn : record.outcomes) lw += table.log_likelihood_row(dn);
  return log_sum_exp(std::span<const double>(lw.data(), lw.size())) -
         std::log(double(prior.grid_size()));
}

struct LocalizationSummary {
  std::vector<double> phi_modes;  // posterior modes above half max, interpolated
  double width = 0.0;             // circular std, folded when a reflection pair
  bool folded = false;
};

// Reports posterior modes above 50% of the maximum weight and a width.  When
// exactly two modes form a reflection pair (phi, 2pi - phi), the posterior is
// folded across the axis before the width is computed.
inline LocalizationSummary localization_summary(const PhaseDistribution& posterior) {
  const int J = posterior.grid_size();
  const Eigen::VectorXd w = posterior.weights();
  const double wmax = w.maxCoeff();
  const double thresh = 0.5 * wmax;

  LocalizationSummary out;
  for (int j = 0; j < J; ++j) {
    const double prev = w[(j - 1 + J) % J], next = w[(j + 1) % J];
    if (w[j] < thresh) continue;
    if (w[j] > prev && w[j] >= next) {
      // parabolic refinement on log weights
      const double l0 = posterior.log_weights()[(j - 1 + J) % J];
      const double l1 = posterior.log_weights()[j];
      const double l2 = posterior.log_weights()[(j + 1) % J];
      double delta = 0.0;
      const double den = l0 - 2.0 * l1 + l2;
      if (std::isfinite(den) && den < 0.0) delta = 0.5 * (l0 - l2) / den;
      out.phi_modes.push_back(wrap_angle((j + delta) * kTwoPi / J));
    }
  }

  const bool reflection_pair =
      out.phi_modes.size() == 2 &&
      circular_distance(out.phi_modes[0] + out.phi_modes[1], 0.0) < 6.0 * kTwoPi / J;
  if (reflection_pair) {
    // fold phi -> 2pi - phi mass onto [0, pi]
    Eigen::VectorXd folded = Eigen::VectorXd::Zero(J);
    folded[0] = w[0];
    for (int j = 1; j < J; ++j) {
      const int tgt = j <= J / 2 ? j : J - j;
      folded[tgt] += w[j];
    }
    const CircularStats st =
        circular_stats(std::span<const double>(folded.data(), folded.size()));
    out.width = st.stddev;
    out.folded = true;
  } else {
    out.width = posterior.stats().stddev;
  }
  return out;
}

inline LocalizationSummary localization_summary(const PosteriorTrace& trace) {
  return localization_summary(trace.final_posterior());
}

}  // namespace homsim
