#pragma once

// Quantum-state tomography scenarios: common-source CW/PW, independent CW LO
// with K x M phase sweeps, independent PW LO; Wigner reconstruction by
// filtered back-projection; overlap scoring and CW/PW source discrimination.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "homsim/common.hpp"
#include "homsim/empirical.hpp"
#include "homsim/fock.hpp"
#include "homsim/homodyne.hpp"
#include "homsim/phasebayes.hpp"

namespace homsim {

enum class ScenarioKind { CommonSourceCW, CommonSourcePW, IndependentCWLO, IndependentPWLO };

inline std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::CommonSourceCW: return "common_source_cw";
    case ScenarioKind::CommonSourcePW: return "common_source_pw";
    case ScenarioKind::IndependentCWLO: return "independent_cw_lo";
    case ScenarioKind::IndependentPWLO: return "independent_pw_lo";
  }
  return "?";
}

// The operation applied to the base coherent packet to make the signal
// rho(0); squeezing commutes with the phase transformation as required.
struct SignalOperation {
  enum class Kind { Identity, Squeeze, Number } kind = Kind::Identity;
  double r = 0.0;  // squeeze parameter
  int n = 0;       // Fock index for Kind::Number

  FockVector apply(double beta, const TruncationPolicy& policy) const {
    switch (kind) {
      case Kind::Identity: return coherent_state(cd(beta, 0.0), policy);
      case Kind::Squeeze: return squeezed_coherent_state(r, beta, policy);
      case Kind::Number: return number_state(n);
    }
    throw ConfigError("unknown signal operation");
  }

  double x_span(double beta) const {
    switch (kind) {
      case Kind::Identity: return default_x_span(beta, 0.0);
      case Kind::Squeeze: return default_x_span(beta, r);
      case Kind::Number: return std::max(6.0, std::sqrt(2.0 * n + 1.0) + 3.0);
    }
    return 6.0;
  }

  std::string describe(double beta) const {
    switch (kind) {
      case Kind::Identity: return "coherent beta=" + std::to_string(beta);
      case Kind::Squeeze:
        return "squeezed r=" + std::to_string(r) + " beta=" + std::to_string(beta);
      case Kind::Number: return "number n=" + std::to_string(n);
    }
    return "?";
  }
};

struct Scenario {
  ScenarioKind kind = ScenarioKind::CommonSourceCW;
  double alpha = std::sqrt(15.0);
  double beta = std::sqrt(3.0);
  SignalOperation operation{};
  PhaseDistribution lo_prior = PhaseDistribution::uniform(720);      // P(phi)
  PhaseDistribution signal_prior = PhaseDistribution::uniform(720);  // P_S(phi')
  int K = 12;
  std::vector<double> theta{};  // defaults to k pi / K
  int M = 5000;
  std::uint64_t seed = 1;
  double mass_tolerance = 1e-10;
  TruncationPolicy policy{};

  std::vector<double> resolved_theta() const {
    std::vector<double> th = theta;
    if (th.empty())
      for (int k = 0; k < K; ++k) th.push_back(M_PI * k / K);
    return th;
  }

  void validate() const {
    if (K < 1) throw ConfigError("K must be >= 1");
    if (M < 1) throw ConfigError("M must be >= 1");
    if (alpha <= 0.0) throw ConfigError("alpha must be positive");
    const std::vector<double> th = resolved_theta();
    if (static_cast<int>(th.size()) != K) throw ConfigError("theta list must have K entries");
    for (std::size_t i = 0; i < th.size(); ++i) {
      if (th[i] < 0.0 || th[i] >= M_PI)
        throw ConfigError("theta values must lie in [0, pi)");
      for (std::size_t j = i + 1; j < th.size(); ++j)
        if (th[i] == th[j]) throw ConfigError("theta values must be distinct");
    }
    if (lo_prior.grid_size() != signal_prior.grid_size())
      throw ConfigError("lo_prior and signal_prior must share a grid");
  }

  DensityOperator signal_rho0() const {
    return DensityOperator::from_pure(operation.apply(beta, policy));
  }
};

// Per-angle outcome statistics.  total > 0 marks sampled frequencies with that
// many outcomes; total == 0 marks exact model probabilities.
struct AngleBlock {
  double theta = 0.0;
  Eigen::VectorXd prob;
  long long total = 0;

  EmpiricalMeasure measure(const QuadratureGrid& grid) const {
    if (total <= 0) throw ConfigError("block holds exact densities, not counts");
    EmpiricalMeasure m(grid);
    Eigen::VectorXd c = prob * double(total);
    for (int i = 0; i < c.size(); ++i)
      for (long long k = 0; k < std::llround(c[i]); ++k) m.add(grid.dn_min + i);
    return m;
  }
};

struct QuadratureDataset {
  QuadratureGrid grid;
  std::vector<AngleBlock> blocks;
};

// Exact (non-sampled) per-angle distributions of rho measured with a finite
// LO of amplitude alpha at phase 0.
inline QuadratureDataset dataset_from_model(const DensityOperator& rho, double alpha,
                                            const std::vector<double>& thetas,
                                            double mass_tolerance = 1e-10,
                                            double x_span = 0.0,
                                            const TruncationPolicy& policy = {}) {
  const BeamSplitterPOVM povm =
      build_povm(alpha, 0.0, rho.cutoff(), mass_tolerance, x_span, policy);
  const QuadraturePhaseSeries series(rho, povm);
  QuadratureDataset ds;
  ds.grid = povm.grid();
  for (double th : thetas) ds.blocks.push_back({th, series.eval(th), 0});
  return ds;
}

// Exact per-angle quadrature marginals <x|rho(-theta)|x> binned on a dn grid
// of the given resolution.  These are the true Radon projections of the
// Wigner function (a finite LO convolves them with its own shot noise), so
// they are the right input for reconstruction self-consistency checks.
inline QuadratureDataset dataset_from_marginals(const DensityOperator& rho,
                                                const std::vector<double>& thetas,
                                                double grid_alpha = std::sqrt(15.0),
                                                double x_span = 0.0) {
  QuadratureDataset ds;
  if (x_span <= 0.0)
    x_span = std::sqrt(2.0 * rho.mean_photon_number() + 1.0) + 5.0;
  const int half = static_cast<int>(std::ceil(std::sqrt(2.0) * grid_alpha * x_span));
  ds.grid = QuadratureGrid{grid_alpha, -half, half};
  Eigen::VectorXd xs(ds.grid.size());
  for (int i = 0; i < xs.size(); ++i) xs[i] = ds.grid.x(ds.grid.dn_min + i);
  for (double th : thetas) {
    const Eigen::VectorXd dens = strong_lo_density(rho, th, xs);
    ds.blocks.push_back({th, dens * ds.grid.dx(), 0});
  }
  return ds;
}

// P_S_bar(phi) = int dphi'/2pi P_S(phi') P(phi + phi'): circular
// cross-correlation on the shared grid.
inline PhaseDistribution convolve_phase(const PhaseDistribution& ps,
                                        const PhaseDistribution& p) {
  const int J = ps.grid_size();
  if (p.grid_size() != J) throw GridMismatchError("phase grids differ");
  const Eigen::VectorXd ws = ps.weights();
  const Eigen::VectorXd wp = p.weights();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(J);
  for (int j = 0; j < J; ++j) {
    double s = 0.0;
    for (int jp = 0; jp < J; ++jp) s += ws[jp] * wp[(j + jp) % J];
    out[j] = s / J;
  }
  return PhaseDistribution::from_weights(out);
}

namespace detail {

// Common-source sampling.  The joint outcome law equals prod q_theta[rho(0)]
// regardless of the source's phase distribution, so this path never receives
// one: the latent common phase is drawn uniformly and enters only through the
// U(1)-covariant pair (LO phase, rotated signal), whose phases cancel
// numerically inside eval_rotated_signal.  CW draws one latent phase per run,
// PW a fresh one per packet.
inline QuadratureDataset run_common_source(const QuadraturePhaseSeries& series,
                                           const std::vector<double>& thetas, int M,
                                           std::uint64_t seed, bool fresh_phase_per_packet) {
  Rng rng(seed);
  QuadratureDataset ds;
  ds.grid = series.grid();
  const int nd = ds.grid.size();
  const double run_phase = kTwoPi * rng.uniform();
  std::vector<double> cdf(nd);
  for (double th : thetas) {
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(nd);
    Eigen::VectorXd prob;
    if (!fresh_phase_per_packet)
      prob = series.eval_rotated_signal(run_phase + th, run_phase);
    for (int i = 0; i < M; ++i) {
      if (fresh_phase_per_packet) {
        const double packet_phase = kTwoPi * rng.uniform();
        prob = series.eval_rotated_signal(packet_phase + th, packet_phase);
      }
      double run = 0.0;
      for (int b = 0; b < nd; ++b) {
        run += prob[b];
        cdf[b] = run;
      }
      counts[static_cast<int>(sample_from_cdf(cdf, rng.uniform()))] += 1.0;
    }
    ds.blocks.push_back({th, counts / double(M), M});
  }
  return ds;
}

}  // namespace detail

// Runs one scenario and returns the per-angle empirical statistics.
inline QuadratureDataset run_scenario(const Scenario& s) {
  s.validate();
  const DensityOperator rho = s.signal_rho0();
  const BeamSplitterPOVM povm = build_povm(s.alpha, 0.0, rho.cutoff(), s.mass_tolerance,
                                           s.operation.x_span(s.beta), s.policy);
  const QuadraturePhaseSeries series(rho, povm);
  const std::vector<double> thetas = s.resolved_theta();

  switch (s.kind) {
    case ScenarioKind::CommonSourceCW:
      return detail::run_common_source(series, thetas, s.M, s.seed, false);
    case ScenarioKind::CommonSourcePW:
      return detail::run_common_source(series, thetas, s.M, s.seed, true);

    case ScenarioKind::IndependentCWLO: {
      // one latent LO phase across all K x M packets, accessed only through
      // the persistent posterior over the convolved prior
      const PhaseDistribution prior = convolve_phase(s.signal_prior, s.lo_prior);
      const int J = prior.grid_size();
      std::vector<PhaseLikelihoodTable> tables;
      tables.reserve(thetas.size());
      for (double th : thetas) tables.emplace_back(series, J, th);
      SequentialSampler sampler(&tables.front(), prior);
      Rng rng(s.seed);
      QuadratureDataset ds;
      ds.grid = povm.grid();
      for (std::size_t k = 0; k < thetas.size(); ++k) {
        sampler.set_table(&tables[k]);
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(ds.grid.size());
        for (int i = 0; i < s.M; ++i)
          counts[ds.grid.index_of(sampler.step(rng).first)] += 1.0;
        ds.blocks.push_back({thetas[k], counts / double(s.M), s.M});
      }
      return ds;
    }

    case ScenarioKind::IndependentPWLO: {
      // single latent signal phase from P_S; every packet gets a fresh LO
      // phase from P(phi) rather than sampling a precomputed smeared q-bar
      Rng rng(s.seed);
      const int J = s.lo_prior.grid_size();
      const Eigen::VectorXd wp = s.lo_prior.weights();
      const Eigen::VectorXd wsig = s.signal_prior.weights();
      std::vector<double> cdf_lo(J), cdf_sig(J);
      double a = 0.0, b = 0.0;
      for (int j = 0; j < J; ++j) {
        a += wp[j];
        cdf_lo[j] = a;
        b += wsig[j];
        cdf_sig[j] = b;
      }
      const double phi_signal =
          kTwoPi * double(sample_from_cdf(cdf_sig, rng.uniform())) / J;
      QuadratureDataset ds;
      ds.grid = povm.grid();
      const int nd = ds.grid.size();
      std::vector<double> cdf(nd);
      for (double th : thetas) {
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(nd);
        for (int i = 0; i < s.M; ++i) {
          const double phi_lo =
              kTwoPi * double(sample_from_cdf(cdf_lo, rng.uniform())) / J;
          const Eigen::VectorXd prob =
              series.eval_rotated_signal(phi_lo + th, phi_signal);
          double run = 0.0;
          for (int q = 0; q < nd; ++q) {
            run += prob[q];
            cdf[q] = run;
          }
          counts[static_cast<int>(sample_from_cdf(cdf, rng.uniform()))] += 1.0;
        }
        ds.blocks.push_back({th, counts / double(s.M), s.M});
      }
      return ds;
    }
  }
  throw ConfigError("unknown scenario kind");
}

// The smeared q-bar of the fresh-phase PW path, for the agreement test:
// q_bar(dn; theta) = sum_j P_j q^(0)(dn; theta - phi_j + phi_signal ... )
inline Eigen::VectorXd pw_smeared_distribution(const QuadraturePhaseSeries& series,
                                               const PhaseDistribution& lo_prior,
                                               double theta, double phi_signal) {
  const int J = lo_prior.grid_size();
  const Eigen::VectorXd w = lo_prior.weights();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(series.grid().size());
  for (int j = 0; j < J; ++j)
    out += w[j] * series.eval_rotated_signal(kTwoPi * j / J + theta, phi_signal);
  return out / double(J);
}

// ---------------------------------------------------------------------------
// Wigner reconstruction and scoring
// ---------------------------------------------------------------------------

struct WignerSettings {
  double extent = 0.0;  // grid covers [-extent, extent]^2; 0: sized from the data
  int points = 0;       // 0: near 0.1 spacing, capped at 201
  double k_max = 0.0;   // 0: auto, 1.5 sqrt(2 (2 nbar + 1)) extended to decay
  int n_xi = 256;       // frequency quadrature points
};

struct WignerGrid {
  double extent = 0.0;
  int points = 0;
  Eigen::MatrixXd values;  // (ix, ip)

  double step() const { return 2.0 * extent / (points - 1); }
  double coord(int i) const { return -extent + i * step(); }
  double integral() const { return values.sum() * step() * step(); }

  void validate(double norm_tol = 0.02) const {
    if (!values.allFinite()) throw ToleranceError("Wigner grid has non-finite entries");
    if (std::fabs(integral() - 1.0) > norm_tol)
      throw ToleranceError("Wigner normalization " + std::to_string(integral()));
  }
};

// Hilbert-Schmidt overlap 2pi int W_a W_b dx dp (= Tr[rho_a rho_b]).
inline double wigner_overlap(const WignerGrid& a, const WignerGrid& b) {
  if (a.points != b.points || a.extent != b.extent)
    throw GridMismatchError("Wigner grids differ");
  return kTwoPi * a.values.cwiseProduct(b.values).sum() * a.step() * a.step();
}

// Filtered back-projection (inverse Radon) of per-angle quadrature
// distributions with a hard frequency cutoff.
inline WignerGrid reconstruct_wigner(const QuadratureDataset& ds,
                                     const WignerSettings& settings = {}) {
  const int K = static_cast<int>(ds.blocks.size());
  if (K < 3) throw ConfigError("insufficient angular coverage: need K >= 3");

  double k_max = settings.k_max;
  if (k_max <= 0.0) {
    // base band-limit from the energy estimate nbar = <x^2>_angle-avg - 1/2
    double x2 = 0.0;
    long long m_min = std::numeric_limits<long long>::max();
    for (const auto& blk : ds.blocks) {
      double s = 0.0;
      for (int i = 0; i < blk.prob.size(); ++i) {
        const double x = ds.grid.x(ds.grid.dn_min + i);
        s += blk.prob[i] * x * x;
      }
      x2 += s;
      m_min = std::min(m_min, blk.total > 0 ? blk.total : std::numeric_limits<long long>::max());
    }
    x2 /= K;
    const double nbar = std::max(0.0, x2 - 0.5);
    k_max = 1.5 * std::sqrt(2.0 * (2.0 * nbar + 1.0));

    // extend while the measured characteristic function still carries signal
    // at the cutoff (narrow quadrature directions of squeezed states decay
    // slower than the energy bound suggests); stop at the sampling noise floor
    const double floor =
        m_min == std::numeric_limits<long long>::max()
            ? 1e-3
            : std::max(1e-3, 1.5 / std::sqrt(double(m_min)));
    auto char_mag = [&](double xi) {
      double mx = 0.0;
      for (const auto& blk : ds.blocks) {
        cd q = 0.0;
        for (int i = 0; i < blk.prob.size(); ++i)
          q += blk.prob[i] * std::polar(1.0, -xi * ds.grid.x(ds.grid.dn_min + i));
        mx = std::max(mx, std::abs(q));
      }
      return mx;
    };
    const double cap = 4.0 * k_max;
    while (k_max < cap && char_mag(k_max) > floor) k_max *= 1.05;
  }

  double extent = settings.extent;
  if (extent <= 0.0)
    extent = std::min(12.0, std::max(std::fabs(ds.grid.x(ds.grid.dn_min)),
                                     std::fabs(ds.grid.x(ds.grid.dn_max))));
  int points = settings.points;
  if (points <= 0) points = std::min(201, 2 * static_cast<int>(std::round(extent / 0.1)) + 1);

  const int n_xi = settings.n_xi;
  const double dxi = k_max / (n_xi - 1);

  // per angle: A_k(xi_t) = w_t xi_t qhat_k(xi_t), trapezoid weights
  std::vector<Eigen::VectorXcd> filt(K);
  for (int k = 0; k < K; ++k) {
    filt[k].resize(n_xi);
    for (int t = 0; t < n_xi; ++t) {
      const double xi = t * dxi;
      cd qhat = 0.0;
      for (int i = 0; i < ds.blocks[k].prob.size(); ++i) {
        const double x = ds.grid.x(ds.grid.dn_min + i);
        qhat += ds.blocks[k].prob[i] * std::polar(1.0, -xi * x);
      }
      const double w = (t == 0 || t == n_xi - 1) ? 0.5 : 1.0;
      filt[k][t] = w * dxi * xi * qhat;
    }
  }

  WignerGrid out;
  out.extent = extent;
  out.points = points;
  out.values.resize(out.points, out.points);
  for (int ix = 0; ix < out.points; ++ix) {
    const double x = out.coord(ix);
    for (int ip = 0; ip < out.points; ++ip) {
      const double p = out.coord(ip);
      double acc = 0.0;
      for (int k = 0; k < K; ++k) {
        const double s = x * std::cos(ds.blocks[k].theta) + p * std::sin(ds.blocks[k].theta);
        const cd rot = std::polar(1.0, dxi * s);
        cd phase = 1.0;
        cd sum = 0.0;
        for (int t = 0; t < n_xi; ++t) {
          sum += filt[k][t] * phase;
          phase *= rot;
        }
        acc += sum.real();
      }
      out.values(ix, ip) = acc / (kTwoPi * K);
    }
  }
  return out;
}

namespace detail {

// <m| D(a) (-1)^n D(-a) |n> for m = n + d, d >= 0: the displaced-parity matrix
// elements that expand a Fock-basis operator over Wigner space.
// W_rho(x, p) = (1/pi) sum_nm rho_nm Pi_mn(alpha), alpha = (x + i p)/sqrt(2).
struct DisplacedParityTable {
  // laguerre(n, d): L_n^{(d)}(y) by upward recurrence
  static Eigen::MatrixXd laguerre_table(int n_max, int d_max, double y) {
    Eigen::MatrixXd lag(n_max + 1, d_max + 1);
    for (int d = 0; d <= d_max; ++d) {
      lag(0, d) = 1.0;
      if (n_max >= 1) lag(1, d) = 1.0 + d - y;
      for (int n = 1; n < n_max; ++n)
        lag(n + 1, d) =
            ((2.0 * n + d + 1.0 - y) * lag(n, d) - (n + d) * lag(n - 1, d)) / (n + 1.0);
    }
    return lag;
  }
};

}  // namespace detail

// Exact Wigner function of a Fock-basis density operator on a square grid.
inline WignerGrid wigner_of_state(const DensityOperator& rho,
                                  const WignerSettings& settings = {}) {
  const int dim = rho.cutoff() + 1;
  WignerGrid out;
  out.extent = settings.extent > 0.0
                   ? settings.extent
                   : std::sqrt(2.0 * rho.mean_photon_number() + 1.0) + 4.0;
  out.points = settings.points > 0
                   ? settings.points
                   : std::min(201, 2 * static_cast<int>(std::round(out.extent / 0.1)) + 1);
  out.values.resize(out.points, out.points);
  const auto& r = rho.matrix();
  for (int ix = 0; ix < out.points; ++ix) {
    const double x = out.coord(ix);
    for (int ip = 0; ip < out.points; ++ip) {
      const double p = out.coord(ip);
      const cd a = cd(x, p) / std::sqrt(2.0);
      const double y = 4.0 * std::norm(a);
      const Eigen::MatrixXd lag = detail::DisplacedParityTable::laguerre_table(dim - 1, dim - 1, y);
      double val = 0.0;
      for (int d = 0; d < dim; ++d) {
        // prefactor sqrt(n!/m!) (2a)^d e^{-y/2}, phase handled via arg(a)
        cd diag_sum = 0.0;
        for (int n = 0; n + d < dim; ++n) {
          const int m = n + d;
          const double lpref = 0.5 * (log_factorial(n) - log_factorial(m)) +
                               (d > 0 ? d * std::log(std::abs(2.0 * a)) : 0.0) - 0.5 * y;
          if (d > 0 && std::abs(a) == 0.0) continue;
          const double sign = n % 2 == 0 ? 1.0 : -1.0;
          const cd pi_mn = sign * std::exp(lpref) *
                           std::polar(1.0, d * std::arg(a)) * lag(n, d);
          diag_sum += r(n, m) * pi_mn;
        }
        val += (d == 0 ? 1.0 : 2.0) * diag_sum.real();
      }
      out.values(ix, ip) = val / M_PI;
    }
  }
  return out;
}

// Overlap of a reconstructed Wigner grid against a reference state; with
// best_rotation the reference is scanned over global phase rotations (the
// reconstructed frame is only defined up to the localized random phase).
struct FidelityResult {
  double overlap = 0.0;
  double best_rotation = 0.0;  // radians applied to the reference
};

inline FidelityResult state_fidelity(const WignerGrid& w, const DensityOperator& reference,
                                     bool best_rotation = false, int rotation_scan = 720) {
  const double radius = std::sqrt(2.0 * reference.mean_photon_number() + 1.0);
  if (radius + 2.0 > w.extent)
    throw ConfigError("Wigner grid too small for the reference state support");

  const int dim = reference.cutoff() + 1;
  const double h = w.step();
  // project the grid onto displaced-parity components: C_d(n) accumulates
  // 2pi/pi * sum_grid W(x,p) Pi_{n+d,n} h^2, so that
  // overlap(psi) = sum_d (2 - delta_d0) Re[e^{i d psi} sum_n rho_{n,n+d} C_d(n)]
  std::vector<Eigen::VectorXcd> comp(dim);
  for (int d = 0; d < dim; ++d) comp[d] = Eigen::VectorXcd::Zero(dim - d);
  for (int ix = 0; ix < w.points; ++ix) {
    const double x = w.coord(ix);
    for (int ip = 0; ip < w.points; ++ip) {
      const double p = w.coord(ip);
      const double wval = w.values(ix, ip);
      if (wval == 0.0) continue;
      const cd a = cd(x, p) / std::sqrt(2.0);
      const double y = 4.0 * std::norm(a);
      const Eigen::MatrixXd lag =
          detail::DisplacedParityTable::laguerre_table(dim - 1, dim - 1, y);
      for (int d = 0; d < dim; ++d) {
        if (d > 0 && std::abs(a) == 0.0) break;
        const cd aphase = std::polar(1.0, d * std::arg(a));
        for (int n = 0; n + d < dim; ++n) {
          const int m = n + d;
          const double lpref = 0.5 * (log_factorial(n) - log_factorial(m)) +
                               (d > 0 ? d * std::log(std::abs(2.0 * a)) : 0.0) - 0.5 * y;
          const double sign = n % 2 == 0 ? 1.0 : -1.0;
          comp[d][n] += wval * sign * std::exp(lpref) * aphase * lag(n, d);
        }
      }
    }
  }
  const double scale = 2.0 * h * h;  // 2pi * (1/pi) * h^2
  const auto& r = reference.matrix();

  auto overlap_at = [&](double psi) {
    // rho(psi)_{nm} = rho_nm e^{i(n-m) psi}; pair (n, n+d) carries e^{-i d psi}
    double total = 0.0;
    for (int d = 0; d < dim; ++d) {
      cd s = 0.0;
      for (int n = 0; n + d < dim; ++n) s += r(n, n + d) * comp[d][n];
      total += (d == 0 ? 1.0 : 2.0) * std::real(std::polar(1.0, -d * psi) * s);
    }
    return scale * total;
  };

  FidelityResult res;
  if (!best_rotation) {
    res.overlap = overlap_at(0.0);
    return res;
  }
  for (int i = 0; i < rotation_scan; ++i) {
    const double psi = kTwoPi * i / rotation_scan;
    const double o = overlap_at(psi);
    if (o > res.overlap) {
      res.overlap = o;
      res.best_rotation = psi;
    }
  }
  return res;
}

struct ReferenceScore {
  std::string name;
  double overlap = 0.0;     // best-rotation HS overlap 2pi int W W_ref
  double normalized = 0.0;  // overlap / sqrt(purity_rec * purity_ref)
  double rotation = 0.0;
};

// Scores a reconstruction against candidate reference states.  Normalization
// by both purities makes scores comparable between pure and mixed references.
inline std::vector<ReferenceScore> score_references(
    const WignerGrid& w,
    const std::vector<std::pair<std::string, DensityOperator>>& references,
    bool best_rotation = true) {
  const double purity_rec =
      std::max(kTwoPi * w.values.array().square().sum() * w.step() * w.step(), 1e-12);
  std::vector<ReferenceScore> out;
  for (const auto& [name, ref] : references) {
    const double purity_ref = (ref.matrix() * ref.matrix()).trace().real();
    const FidelityResult f = state_fidelity(w, ref, best_rotation);
    ReferenceScore sc;
    sc.name = name;
    sc.overlap = f.overlap;
    sc.rotation = f.best_rotation;
    sc.normalized = f.overlap / std::sqrt(purity_rec * purity_ref);
    out.push_back(sc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CW / PW source discrimination
// ---------------------------------------------------------------------------

enum class LaserKind { CW, PW };

struct DiscriminationParams {
  double alpha = std::sqrt(15.0);
  double beta = std::sqrt(3.0);
  int K = 12;
  int M = 5000;
  int grid_j = 720;
  double mass_tolerance = 1e-10;
  WignerSettings wigner{};
  TruncationPolicy policy{};
};

struct DiscriminationReport {
  std::string verdict;  // "coherent" or "mixed"
  std::uint64_t seed = 0;
  std::vector<ReferenceScore> scores;
  double wigner_integral = 0.0;
};

// Tomography of a laser-field signal with an independent CW LO.  A CW signal
// shares one latent phase across packets and reconstructs as a (rotated)
// coherent state; a PW signal has a fresh phase per packet, so the data follow
// the P_S-smeared distribution and reconstruct as the phase-averaged state.
inline DiscriminationReport discriminate_cw_pw(LaserKind signal_kind,
                                               const DiscriminationParams& params,
                                               std::uint64_t seed) {
  const DensityOperator rho =
      DensityOperator::from_pure(coherent_state(cd(params.beta, 0.0), params.policy));
  const BeamSplitterPOVM povm =
      build_povm(params.alpha, 0.0, rho.cutoff(), params.mass_tolerance,
                 default_x_span(params.beta, 0.0), params.policy);
  QuadraturePhaseSeries series(rho, povm);
  const PhaseDistribution uniform = PhaseDistribution::uniform(params.grid_j);
  if (signal_kind == LaserKind::PW) {
    // fresh signal phase per packet: smear the series over P_S (uniform here)
    series = series.smeared_over_signal_phase(uniform.fourier_weights(rho.cutoff()));
  }

  std::vector<double> thetas;
  for (int k = 0; k < params.K; ++k) thetas.push_back(M_PI * k / params.K);
  std::vector<PhaseLikelihoodTable> tables;
  tables.reserve(thetas.size());
  for (double th : thetas) tables.emplace_back(series, params.grid_j, th);

  SequentialSampler sampler(&tables.front(), uniform);
  Rng rng(seed);
  QuadratureDataset ds;
  ds.grid = povm.grid();
  for (std::size_t k = 0; k < thetas.size(); ++k) {
    sampler.set_table(&tables[k]);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(ds.grid.size());
    for (int i = 0; i < params.M; ++i)
      counts[ds.grid.index_of(sampler.step(rng).first)] += 1.0;
    ds.blocks.push_back({thetas[k], counts / double(params.M), params.M});
  }

  const WignerGrid w = reconstruct_wigner(ds, params.wigner);
  DiscriminationReport rep;
  rep.seed = seed;
  rep.wigner_integral = w.integral();
  rep.scores = score_references(
      w,
      {{"coherent", rho},
       {"mixed", phase_averaged_laser_state(params.beta, params.policy)}},
      true);
  rep.verdict = rep.scores[0].normalized >= rep.scores[1].normalized ? "coherent" : "mixed";
  return rep;
}

}  // namespace homsim
