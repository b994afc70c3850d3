#pragma once

// Truncated Fock-space states: coherent, phase-averaged (laser), squeezed-coherent
// and number states, phase rotations, and harmonic-oscillator wavefunctions.
//
// Convention used everywhere in this library: x = (a + a^dag)/sqrt(2), so the
// vacuum quadrature variance is 1/2.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <string>

#include "homsim/common.hpp"

namespace homsim {

// Picks the Fock cutoff for a target mean photon number.  The rule
// N = ceil(mu + 10 sqrt(mu) + 20) keeps Poisson tails far below 1e-12;
// constructors still verify the realized tail and extend when a state
// (e.g. strongly squeezed) decays slower than Poisson.
struct TruncationPolicy {
  double tail_tolerance = 1e-12;  // admissible probability mass above the cutoff
  int hard_max = 4096;            // guard against runaway amplitudes

  int cutoff_for_mean(double mu) const {
    int n = static_cast<int>(std::ceil(mu + 10.0 * std::sqrt(mu) + 20.0));
    if (n > hard_max)
      throw ToleranceError("cutoff " + std::to_string(n) + " exceeds hard maximum " +
                           std::to_string(hard_max));
    return n;
  }
};

class FockVector {
 public:
  FockVector() = default;
  explicit FockVector(Eigen::VectorXcd amplitudes) : amp_(std::move(amplitudes)) {}

  int cutoff() const { return static_cast<int>(amp_.size()) - 1; }
  const Eigen::VectorXcd& amplitudes() const { return amp_; }
  cd amplitude(int n) const { return amp_[n]; }

  double norm_sq() const { return amp_.squaredNorm(); }

  double mean_photon_number() const {
    double s = 0.0;
    for (int n = 0; n <= cutoff(); ++n) s += n * std::norm(amp_[n]);
    return s;
  }

  Eigen::VectorXd photon_distribution() const {
    Eigen::VectorXd p(amp_.size());
    for (int n = 0; n < amp_.size(); ++n) p[n] = std::norm(amp_[n]);
    return p;
  }

  // <a>, from which the quadrature mean is sqrt(2) Re<a> at phase 0.
  cd ladder_expectation() const {
    cd s = 0.0;
    for (int n = 0; n + 1 <= cutoff(); ++n)
      s += std::conj(amp_[n]) * std::sqrt(double(n + 1)) * amp_[n + 1];
    return s;
  }

  FockVector resized(int new_cutoff) const {
    Eigen::VectorXcd a = Eigen::VectorXcd::Zero(new_cutoff + 1);
    const int keep = std::min(new_cutoff, cutoff());
    a.head(keep + 1) = amp_.head(keep + 1);
    return FockVector(a);
  }

 private:
  Eigen::VectorXcd amp_;
};

class DensityOperator {
 public:
  DensityOperator() = default;
  explicit DensityOperator(Eigen::MatrixXcd m) : mat_(std::move(m)) {
    if (mat_.rows() != mat_.cols()) throw GridMismatchError("density matrix must be square");
  }

  static DensityOperator from_pure(const FockVector& psi) {
    return DensityOperator(psi.amplitudes() * psi.amplitudes().adjoint());
  }

  int cutoff() const { return static_cast<int>(mat_.rows()) - 1; }
  const Eigen::MatrixXcd& matrix() const { return mat_; }

  double trace() const { return mat_.trace().real(); }

  double mean_photon_number() const {
    double s = 0.0;
    for (int n = 0; n <= cutoff(); ++n) s += n * mat_(n, n).real();
    return s;
  }

  DensityOperator resized(int new_cutoff) const {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(new_cutoff + 1, new_cutoff + 1);
    const int keep = std::min(new_cutoff, cutoff());
    m.topLeftCorner(keep + 1, keep + 1) = mat_.topLeftCorner(keep + 1, keep + 1);
    return DensityOperator(m);
  }

  // Hermiticity / positivity / trace checks (the invariants of the type).
  void validate(double trace_tol = 1e-10, double herm_tol = 1e-12,
                double psd_tol = 1e-10) const {
    const double herm = (mat_ - mat_.adjoint()).cwiseAbs().maxCoeff();
    if (herm > herm_tol)
      throw ToleranceError("density matrix not Hermitian: defect " + std::to_string(herm));
    if (std::fabs(trace() - 1.0) > trace_tol)
      throw ToleranceError("density matrix trace " + std::to_string(trace()));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(mat_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -psd_tol)
      throw ToleranceError("density matrix has negative eigenvalue " +
                           std::to_string(es.eigenvalues().minCoeff()));
  }

 private:
  Eigen::MatrixXcd mat_;
};

namespace detail {

// log of the coherent amplitude magnitude: -|alpha|^2/2 + n log|alpha| - log(n!)/2
inline double log_coherent_amp(double abs_alpha, int n) {
  if (abs_alpha == 0.0) return n == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return -0.5 * abs_alpha * abs_alpha + n * std::log(abs_alpha) - 0.5 * log_factorial(n);
}

}  // namespace detail

// |alpha> = exp(-|alpha|^2/2) sum_n alpha^n / sqrt(n!) |n>
inline FockVector coherent_state(cd alpha, const TruncationPolicy& policy = {}) {
  if (policy.tail_tolerance <= 0.0 || policy.tail_tolerance >= 1.0)
    throw ConfigError("tail_tolerance must lie in (0, 1)");
  const double mu = std::norm(alpha);
  int n_max = policy.cutoff_for_mean(mu);
  const double arg = std::arg(alpha);

  auto build = [&](int nm) {
    Eigen::VectorXcd a(nm + 1);
    for (int n = 0; n <= nm; ++n) {
      const double lg = detail::log_coherent_amp(std::abs(alpha), n);
      a[n] = std::polar(std::exp(lg), n * arg);
    }
    return a;
  };

  Eigen::VectorXcd a = build(n_max);
  while (1.0 - a.squaredNorm() > policy.tail_tolerance) {
    n_max += 32;
    if (n_max > policy.hard_max)
      throw ToleranceError("coherent state cutoff exceeds hard maximum");
    a = build(n_max);
  }
  return FockVector(std::move(a));
}

inline FockVector number_state(int n, int cutoff = -1) {
  const int nm = cutoff < 0 ? n : cutoff;
  if (n > nm) throw ConfigError("number state index exceeds cutoff");
  Eigen::VectorXcd a = Eigen::VectorXcd::Zero(nm + 1);
  a[n] = 1.0;
  return FockVector(a);
}

// Uniform phase average of |alpha e^{i phi}>: the diagonal Poissonian mixed state
// describing the field inside a laser cavity.
inline DensityOperator phase_averaged_laser_state(double magnitude,
                                                  const TruncationPolicy& policy = {}) {
  if (magnitude < 0.0) throw ConfigError("magnitude must be >= 0");
  const FockVector coh = coherent_state(cd(magnitude, 0.0), policy);
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(coh.cutoff() + 1, coh.cutoff() + 1);
  for (int n = 0; n <= coh.cutoff(); ++n) m(n, n) = std::norm(coh.amplitude(n));
  return DensityOperator(std::move(m));
}

// Squeezed-coherent state S(r) D(beta) |0> with S(r) = exp[(r/2)(a^2 - a^dag^2)],
// so the quadrature mean is sqrt(2) beta e^{-r} and the variance e^{-2r}/2 at
// phase 0.  Amplitudes come from the closed-form ground amplitude plus the
// three-term recurrence obtained from the Bogoliubov-transformed annihilator.
inline FockVector squeezed_coherent_state(double r, double beta,
                                          const TruncationPolicy& policy = {}) {
  if (std::fabs(r) > 3.0) throw ConfigError("squeeze parameter |r| must be <= 3");
  const double b = beta * std::exp(-r);  // displacement after commuting through S
  const double th = std::tanh(r);
  const double mu = b * b + std::sinh(r) * std::sinh(r);
  int n_max = policy.cutoff_for_mean(mu);

  auto build = [&](int nm) {
    Eigen::VectorXd c(nm + 1);
    c[0] = std::exp(-0.5 * b * b * (1.0 + th)) / std::sqrt(std::cosh(r));
    if (nm >= 1) c[1] = b * (1.0 + th) * c[0];
    for (int n = 1; n < nm; ++n)
      c[n + 1] = (b * (1.0 + th) * c[n] - th * std::sqrt(double(n)) * c[n - 1]) /
                 std::sqrt(double(n + 1));
    return c;
  };

  Eigen::VectorXd c = build(n_max);
  // squeezed tails decay slower than Poisson; grow the cutoff until the
  // truncated norm meets the policy
  while (1.0 - c.squaredNorm() > policy.tail_tolerance) {
    n_max += 32;
    if (n_max > policy.hard_max)
      throw ToleranceError("squeezed state cutoff exceeds hard maximum (|r| too large)");
    c = build(n_max);
  }
  return FockVector(c.cast<cd>());
}

// c_n -> c_n e^{i n phi}; the U(1) phase transformation.
inline FockVector phase_rotate(const FockVector& psi, double phi) {
  Eigen::VectorXcd a = psi.amplitudes();
  for (int n = 0; n < a.size(); ++n) a[n] *= std::polar(1.0, n * phi);
  return FockVector(std::move(a));
}

inline DensityOperator phase_rotate(const DensityOperator& rho, double phi) {
  Eigen::MatrixXcd m = rho.matrix();
  const int d = static_cast<int>(m.rows());
  Eigen::VectorXcd u(d);
  for (int n = 0; n < d; ++n) u[n] = std::polar(1.0, n * phi);
  return DensityOperator(u.asDiagonal() * m * u.asDiagonal().toDenseMatrix().conjugate());
}

inline double fidelity(const FockVector& a, const FockVector& b) {
  const int n = std::min(a.cutoff(), b.cutoff());
  cd ov = 0.0;
  for (int i = 0; i <= n; ++i) ov += std::conj(a.amplitude(i)) * b.amplitude(i);
  return std::norm(ov);
}

// Harmonic-oscillator eigenfunction psi_n(x) for x = (a + a^dag)/sqrt(2).
// Normalized three-term recurrence; values stay bounded so there is no
// overflow even for n in the hundreds.
inline double quadrature_wavefunction(int n, double x) {
  double pm1 = 0.0;
  double p = std::pow(M_PI, -0.25) * std::exp(-0.5 * x * x);
  for (int k = 0; k < n; ++k) {
    const double next =
        x * std::sqrt(2.0 / (k + 1)) * p - std::sqrt(double(k) / (k + 1)) * pm1;
    pm1 = p;
    p = next;
  }
  return p;
}

// All of psi_0..psi_nmax at one x (shares the recurrence).
inline Eigen::VectorXd quadrature_wavefunctions(int n_max, double x) {
  Eigen::VectorXd out(n_max + 1);
  double pm1 = 0.0;
  double p = std::pow(M_PI, -0.25) * std::exp(-0.5 * x * x);
  out[0] = p;
  for (int k = 0; k < n_max; ++k) {
    const double next =
        x * std::sqrt(2.0 / (k + 1)) * p - std::sqrt(double(k) / (k + 1)) * pm1;
    pm1 = p;
    p = next;
    out[k + 1] = p;
  }
  return out;
}

}  // namespace homsim
