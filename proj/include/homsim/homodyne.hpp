#pragma once

// Photon-number-difference measurement of a signal mixed with a coherent local
// oscillator on a 50:50 beam splitter.
//
// Beam-splitter convention (locked against the sign of the coherent-signal
// mean): a_out = (a + b)/sqrt(2), b_out = (a - b)/sqrt(2), dn = n_a - n_b,
// so E[dn] = <a^dag b + a b^dag> = 2 alpha beta cos(phi) for real amplitudes.
// The quadrature value is x = dn / (sqrt(2) alpha).
//
// POVM elements are built without materializing the two-mode unitary: the
// beam-splitter amplitudes <n, T-n | B | s, T-s> obey stable three-term
// recurrences along ribbons of constant total photon number T, and the LO
// contracts analytically through its coherent amplitudes.

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "homsim/common.hpp"
#include "homsim/fock.hpp"

namespace homsim {

struct QuadratureGrid {
  double lo_amplitude = 1.0;  // alpha > 0
  int dn_min = 0;
  int dn_max = 0;

  double dx() const { return 1.0 / (std::sqrt(2.0) * lo_amplitude); }
  double x(int dn) const { return dn * dx(); }
  int size() const { return dn_max - dn_min + 1; }
  int index_of(int dn) const { return dn - dn_min; }
  bool contains(int dn) const { return dn >= dn_min && dn <= dn_max; }

  bool operator==(const QuadratureGrid& o) const {
    return lo_amplitude == o.lo_amplitude && dn_min == o.dn_min && dn_max == o.dn_max;
  }
};

// Default span of quadrature values the dn window must cover, given the
// signal's displacement and squeeze parameters.
inline double default_x_span(double beta = 0.0, double r = 0.0) {
  return std::max(6.0, std::sqrt(2.0) * (std::fabs(beta) * std::exp(std::fabs(r)) + 3.0));
}

class BeamSplitterPOVM {
 public:
  BeamSplitterPOVM() = default;
  BeamSplitterPOVM(double alpha, double phi, QuadratureGrid grid,
                   std::vector<Eigen::MatrixXcd> elements, double omitted_mass)
      : alpha_(alpha),
        phi_(phi),
        grid_(grid),
        elements_(std::move(elements)),
        omitted_mass_(omitted_mass) {}

  double lo_amplitude() const { return alpha_; }
  double lo_phase() const { return phi_; }
  const QuadratureGrid& grid() const { return grid_; }
  int signal_cutoff() const { return static_cast<int>(elements_.front().rows()) - 1; }
  const Eigen::MatrixXcd& element(int dn) const { return elements_[grid_.index_of(dn)]; }
  const std::vector<Eigen::MatrixXcd>& elements() const { return elements_; }
  // dn mass missed by the stored window for the maximally mixed truncated signal
  double omitted_mass() const { return omitted_mass_; }

  // POVM invariants: each element PSD, elements sum to the identity.
  void validate(double completeness_tol = 1e-8, double psd_tol = 1e-10) const {
    const int d = signal_cutoff() + 1;
    Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(d, d);
    for (const auto& e : elements_) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(e, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() < -psd_tol)
        throw ToleranceError("POVM element not positive semidefinite: " +
                             std::to_string(es.eigenvalues().minCoeff()));
      sum += e;
    }
    Eigen::MatrixXcd defect = Eigen::MatrixXcd::Identity(d, d) - sum;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(defect, Eigen::EigenvaluesOnly);
    const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
    if (norm > completeness_tol)
      throw ToleranceError("POVM completeness defect " + std::to_string(norm));
  }

 private:
  double alpha_ = 1.0;
  double phi_ = 0.0;
  QuadratureGrid grid_;
  std::vector<Eigen::MatrixXcd> elements_;
  double omitted_mass_ = 0.0;
};

struct QuadratureDistribution {
  QuadratureGrid grid;
  Eigen::VectorXd prob;     // P(dn), indexed by grid
  Eigen::VectorXd density;  // prob * sqrt(2) alpha

  double total() const { return prob.sum(); }

  double mean_x() const {
    double m = 0.0;
    for (int i = 0; i < prob.size(); ++i) m += prob[i] * grid.x(grid.dn_min + i);
    return m;
  }
};

namespace detail {

// All beam-splitter amplitudes <n, T-n | B | s, T-s> for one ribbon of total
// photon number T (rows n, cols s = 0..s_max).
//
// On the ribbon the splitter acts as the spin-J rotation exp(i (pi/2) J_y)
// with J = T/2 (Schwinger mapping), followed by the pi phase on mode b.  The
// phase twist diag(i^k) turns J_y into a real symmetric tridiagonal matrix,
// whose eigendecomposition gives every element with uniform accuracy; naive
// three-term ladder recurrences blow up in the oscillatory midband once
// T reaches the low hundreds.
inline Eigen::MatrixXd bs_ribbon(int T, int s_max) {
  const int dim = T + 1;
  const int cols = std::min(T, s_max) + 1;
  if (T == 0) return Eigen::MatrixXd::Ones(1, 1);

  Eigen::VectorXd diag = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sub(dim - 1);
  for (int k = 0; k + 1 <= T; ++k) sub[k] = 0.5 * std::sqrt(double((k + 1) * (T - k)));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  const Eigen::MatrixXd& q = es.eigenvectors();

  Eigen::VectorXd c(dim), s(dim);
  for (int i = 0; i < dim; ++i) {
    c[i] = std::cos(M_PI_2 * es.eigenvalues()[i]);
    s[i] = std::sin(M_PI_2 * es.eigenvalues()[i]);
  }
  // element (n, s'): Re[ i^{s'-n} (C + i S) ], C/S the cos/sin Gram sums
  const Eigen::MatrixXd qc = q * c.asDiagonal();
  const Eigen::MatrixXd qs = q * s.asDiagonal();
  const Eigen::MatrixXd cq = qc * q.transpose();
  const Eigen::MatrixXd sq = qs * q.transpose();
  Eigen::MatrixXd out(dim, cols);
  for (int n = 0; n < dim; ++n)
    for (int sc = 0; sc < cols; ++sc) {
      double v;
      switch (((sc - n) % 4 + 4) % 4) {
        case 0: v = cq(n, sc); break;
        case 1: v = -sq(n, sc); break;
        case 2: v = -cq(n, sc); break;
        default: v = sq(n, sc); break;
      }
      out(n, sc) = (T - n) % 2 == 0 ? v : -v;  // e^{i pi n_b} on the outputs
    }
  return out;
}

}  // namespace detail

// Builds the POVM {E_dn} for LO amplitude alpha and phase phi on signals
// truncated at signal_cutoff.  The dn window is the smallest symmetric one
// whose omitted mass for the maximally mixed truncated signal is below
// mass_tolerance (and at least ceil(sqrt(2) alpha x_span) wide).
inline BeamSplitterPOVM build_povm(double alpha, double phi, int signal_cutoff,
                                   double mass_tolerance = 1e-10,
                                   double x_span = 0.0,
                                   const TruncationPolicy& policy = {}) {
  if (alpha <= 0.0) throw ConfigError("LO amplitude must be positive");
  if (signal_cutoff < 0) throw ConfigError("signal cutoff must be >= 0");
  const int n_lo = policy.cutoff_for_mean(alpha * alpha);
  const int t_max = signal_cutoff + n_lo;
  const int dim = signal_cutoff + 1;

  // coherent LO amplitudes (real, alpha > 0), up to the largest k = T - s
  Eigen::VectorXd lo_amp(t_max + 1);
  for (int k = 0; k <= t_max; ++k)
    lo_amp[k] = std::exp(detail::log_coherent_amp(alpha, k));

  std::vector<Eigen::MatrixXd> acc(2 * t_max + 1);  // index dn + t_max
  for (auto& m : acc) m = Eigen::MatrixXd::Zero(dim, dim);

  Eigen::VectorXd v(dim);
  for (int T = 0; T <= t_max; ++T) {
    const Eigen::MatrixXd ribbon = detail::bs_ribbon(T, signal_cutoff);
    const int cols = static_cast<int>(ribbon.cols());
    // unitarity guard: ribbon columns are unit vectors
    for (int s = 0; s < cols; ++s) {
      const double defect = std::fabs(ribbon.col(s).squaredNorm() - 1.0);
      if (defect > 1e-8)
        throw ToleranceError("beam-splitter ribbon defect " + std::to_string(defect) +
                             " at T=" + std::to_string(T));
    }
    for (int n = 0; n <= T; ++n) {
      v.setZero();
      for (int s = 0; s < cols; ++s) v[s] = ribbon(n, s) * lo_amp[T - s];
      acc[2 * n - T + t_max].selfadjointView<Eigen::Lower>().rankUpdate(v, 1.0);
    }
  }

  // choose the symmetric window
  Eigen::VectorXd mass(2 * t_max + 1);
  for (int i = 0; i <= 2 * t_max; ++i)
    mass[i] = acc[i].diagonal().sum() / dim;  // maximally mixed signal
  int half = static_cast<int>(std::ceil(std::sqrt(2.0) * alpha * x_span));
  half = std::min(half, t_max);
  auto omitted = [&](int h) {
    double inside = 0.0;
    for (int dn = -h; dn <= h; ++dn) inside += mass[dn + t_max];
    return 1.0 - inside;
  };
  while (half < t_max && omitted(half) > mass_tolerance) ++half;
  const double omit = omitted(half);
  if (omit > mass_tolerance)
    throw ToleranceError("dn window cannot reach mass tolerance: omitted " +
                         std::to_string(omit));

  QuadratureGrid grid{alpha, -half, half};
  std::vector<Eigen::MatrixXcd> elements(grid.size());
  Eigen::VectorXcd u(dim);
  for (int s = 0; s < dim; ++s) u[s] = std::polar(1.0, s * phi);
  for (int dn = -half; dn <= half; ++dn) {
    Eigen::MatrixXd full = acc[dn + t_max].selfadjointView<Eigen::Lower>();
    if (phi == 0.0)
      elements[grid.index_of(dn)] = full.cast<cd>();
    else
      elements[grid.index_of(dn)] =
          u.asDiagonal() * full.cast<cd>() * u.conjugate().asDiagonal();
  }
  return BeamSplitterPOVM(alpha, phi, grid, std::move(elements), omit);
}

// P(dn) = Tr[rho E_dn]; density carries the sqrt(2) alpha prefactor.
inline QuadratureDistribution quadrature_distribution(const DensityOperator& rho,
                                                      const BeamSplitterPOVM& povm) {
  if (rho.cutoff() != povm.signal_cutoff())
    throw GridMismatchError("signal cutoff does not match POVM");
  QuadratureDistribution out;
  out.grid = povm.grid();
  out.prob.resize(out.grid.size());
  for (int i = 0; i < out.grid.size(); ++i) {
    const double p = (rho.matrix() * povm.elements()[i]).trace().real();
    out.prob[i] = std::max(p, 0.0);
  }
  out.density = out.prob * std::sqrt(2.0) * povm.lo_amplitude();
  return out;
}

// Strong-LO limit: q_phi(x) = <x| U_phi^dag rho U_phi |x>.
inline Eigen::VectorXd strong_lo_density(const DensityOperator& rho, double phi,
                                         const Eigen::VectorXd& x_points) {
  const DensityOperator rot = phase_rotate(rho, -phi);
  Eigen::VectorXd out(x_points.size());
  for (int i = 0; i < x_points.size(); ++i) {
    const Eigen::VectorXd psi = quadrature_wavefunctions(rho.cutoff(), x_points[i]);
    const cd val = psi.cast<cd>().dot(rot.matrix() * psi.cast<cd>());
    out[i] = std::max(val.real(), 0.0);
  }
  return out;
}

// Fourier view of q over the LO phase: with F_dn(d) = sum_{n-m=d} rho_nm E_mn
// evaluated on the POVM's base phase, probabilities at base + psi are
// q(dn) = F_dn(0) + 2 sum_{d>=1} Re[e^{-i d psi} F_dn(d)].  One build serves
// every phase, which makes dense phase grids cheap.
class QuadraturePhaseSeries {
 public:
  QuadraturePhaseSeries(const DensityOperator& rho, const BeamSplitterPOVM& povm)
      : grid_(povm.grid()), base_phase_(povm.lo_phase()) {
    if (rho.cutoff() != povm.signal_cutoff())
      throw GridMismatchError("signal cutoff does not match POVM");
    const int dim = rho.cutoff() + 1;
    coef_.resize(grid_.size(), dim);
    const auto& r = rho.matrix();
    for (int i = 0; i < grid_.size(); ++i) {
      const auto& e = povm.elements()[i];
      for (int d = 0; d < dim; ++d) {
        cd f = 0.0;
        for (int m = 0; m + d < dim; ++m) f += r(m + d, m) * e(m, m + d);
        coef_(i, d) = f;
      }
    }
  }

  const QuadratureGrid& grid() const { return grid_; }
  double base_phase() const { return base_phase_; }

  // Probabilities at LO phase = base_phase + psi (clamped at zero).
  Eigen::VectorXd eval(double psi) const {
    Eigen::VectorXd p = coef_.col(0).real();
    const cd z = std::polar(1.0, -psi);
    cd w = z;
    for (int d = 1; d < coef_.cols(); ++d) {
      p.noalias() += 2.0 * std::real(w) * coef_.col(d).real();
      p.noalias() -= 2.0 * std::imag(w) * coef_.col(d).imag();
      w *= z;
    }
    return p.cwiseMax(0.0);
  }

  // Same series with the signal phase-rotated by chi (rho -> U_chi rho U_chi^dag),
  // realized numerically as F(d) -> F(d) e^{i d chi}.
  Eigen::VectorXd eval_rotated_signal(double psi, double chi) const {
    Eigen::VectorXd p = coef_.col(0).real();
    const cd z = std::polar(1.0, -psi);
    const cd rot = std::polar(1.0, chi);
    cd w = z, s = rot;
    for (int d = 1; d < coef_.cols(); ++d) {
      const cd ws = w * s;
      p.noalias() += 2.0 * std::real(ws) * coef_.col(d).real();
      p.noalias() -= 2.0 * std::imag(ws) * coef_.col(d).imag();
      w *= z;
      s *= rot;
    }
    return p.cwiseMax(0.0);
  }

  // Smears the series over the signal phase with Fourier weights
  // w_d = (1/J) sum_j P_j e^{i d phi_j} of a gridded phase distribution P;
  // requires w for every d up to the signal cutoff.
  QuadraturePhaseSeries smeared_over_signal_phase(const Eigen::VectorXcd& w) const {
    if (w.size() < coef_.cols())
      throw GridMismatchError("smearing weights shorter than the Fourier band");
    QuadraturePhaseSeries out(*this);
    for (int d = 0; d < out.coef_.cols(); ++d) out.coef_.col(d) *= w[d];
    return out;
  }

 private:
  QuadratureGrid grid_;
  double base_phase_;
  Eigen::MatrixXcd coef_;  // rows: dn bins, cols: d >= 0
};

}  // namespace homsim
