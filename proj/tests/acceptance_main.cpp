// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure.  Thresholds are fixed here, not tuned at runtime.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <mutex>
#include <thread>
#include <vector>

#include "homsim/io.hpp"
#include "oracles.hpp"

using namespace homsim;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int idx, const char* name, bool ok, const std::string& detail) {
  std::printf("%s  criterion %d  %-34s %s\n", ok ? "PASS" : "FAIL", idx, name,
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void parallel_over(int n, const std::function<void(int)>& fn) {
  const unsigned workers = std::max(1u, std::min(std::thread::hardware_concurrency(),
                                                 static_cast<unsigned>(n)));
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  for (auto& t : pool) t.join();
}

struct Fig2Setup {
  double alpha = std::sqrt(15.0);
  double beta = std::sqrt(3.0) * std::exp(-1.0);  // so beta e^{-r} = sqrt(3)
  double r = -1.0;
  DensityOperator rho;
  BeamSplitterPOVM povm;
  QuadraturePhaseSeries series;

  Fig2Setup()
      : rho(DensityOperator::from_pure(squeezed_coherent_state(-1.0, beta))),
        povm(build_povm(alpha, 0.0, rho.cutoff(), 1e-10, default_x_span(beta, r))),
        series(rho, povm) {}
};

// criteria 1 and 2 share the ten seeded Fig. 2 runs
void criteria_fig2(const Fig2Setup& fig) {
  const int J = 4096;  // width-grade phase grid
  const int M = 10000;
  const PhaseLikelihoodTable table(fig.series, J);
  const PhaseDistribution prior = PhaseDistribution::uniform(J);

  const int n_seeds = 10;
  std::vector<int> tv_ok(n_seeds, 0), mode_ok(n_seeds, 0);
  std::vector<double> seed_seconds(n_seeds, 0.0);
  std::mutex mu;

  parallel_over(n_seeds, [&](int i) {
    const std::uint64_t seed = i + 1;
    const auto t0 = Clock::now();
    SampleOptions opt;
    opt.record_trace = false;
    const SequentialRun run = run_sequential(table, prior, M, seed, opt);
    const LocalizationSummary loc = localization_summary(run.trace);
    const double phi0 = loc.phi_modes.front();

    const Eigen::VectorXd prob = fig.series.eval(phi0);
    const QuadratureDistribution model{fig.povm.grid(), prob,
                                       prob * std::sqrt(2.0) * fig.alpha};
    const EmpiricalMeasure emp = empirical_measure(run.record, fig.povm.grid());
    const double tv = distance(emp, model).tv;
    const double p95 =
        percentile(resampling_tv_baseline(model, M, 200, seed * 1000003 + 17), 0.95);

    const PhasePair est = estimate_phase_from_mean(run.record.mean_x(), fig.beta, fig.r);
    double dev = kTwoPi;
    for (double mode : loc.phi_modes)
      dev = std::min({dev, circular_distance(mode, est.phi_plus),
                      circular_distance(mode, est.phi_minus)});

    std::scoped_lock lock(mu);
    tv_ok[i] = tv < p95;
    mode_ok[i] = dev < 3.0 * loc.width;
    seed_seconds[i] = elapsed(t0);
  });

  int tv_pass = 0, mode_pass = 0;
  double worst = 0.0;
  for (int i = 0; i < n_seeds; ++i) {
    tv_pass += tv_ok[i];
    mode_pass += mode_ok[i];
    worst = std::max(worst, seed_seconds[i]);
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d/10 seeds under the 95%% resampling baseline, max %.1f s/seed",
                tv_pass, worst);
  report(1, "Fig. 2 reproduction (TV)", tv_pass >= 9 && worst < 60.0, buf);
  std::snprintf(buf, sizeof(buf), "%d/10 seeds: mode within 3 folded widths of +-arccos", mode_pass);
  report(2, "phase-estimator consistency", mode_pass >= 9, buf);
}

void criterion3_scaling() {
  const double beta = std::sqrt(3.0);
  const DensityOperator rho = DensityOperator::from_pure(coherent_state(cd(beta, 0.0)));
  const BeamSplitterPOVM povm =
      build_povm(std::sqrt(15.0), 0.0, rho.cutoff(), 1e-10, default_x_span(beta, 0.0));
  const QuadraturePhaseSeries series(rho, povm);
  const int J = 4096;
  const PhaseLikelihoodTable table(series, J);
  const PhaseDistribution prior = PhaseDistribution::uniform(J);

  const std::vector<int> Ms{100, 400, 1600, 6400};
  const int n_seeds = 50;
  std::vector<std::vector<double>> widths(Ms.size(), std::vector<double>(n_seeds));
  std::mutex mu;
  parallel_over(n_seeds, [&](int i) {
    SampleOptions opt;
    opt.record_trace = false;
    opt.snapshot_steps = Ms;
    const SequentialRun run = run_sequential(table, prior, Ms.back(), i + 1, opt);
    std::scoped_lock lock(mu);
    for (std::size_t k = 0; k < Ms.size(); ++k)
      widths[k][i] = localization_summary(run.trace.snapshots.at(Ms[k])).width;
  });

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < Ms.size(); ++k) {
    std::sort(widths[k].begin(), widths[k].end());
    const double med = 0.5 * (widths[k][n_seeds / 2 - 1] + widths[k][n_seeds / 2]);
    const double lx = std::log(double(Ms[k])), ly = std::log(med);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = double(Ms.size());
  const double p = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double c = std::exp((sy - p * sx) / n);
  const double c_ref = 1.0 / (2.0 * beta);
  const bool ok = p > -0.6 && p < -0.4 && c > 0.5 * c_ref && c < 2.0 * c_ref;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "width ~ %.4f M^%.3f (want p=-0.5+-0.1, c in [%.4f, %.4f])",
                c, p, 0.5 * c_ref, 2.0 * c_ref);
  report(3, "localization scaling", ok, buf);
}

void criterion4_povm_oracle() {
  const auto t0 = Clock::now();
  const double alpha = 2.0;
  const int cutoff = 10;
  const BeamSplitterPOVM povm = build_povm(alpha, 0.0, cutoff, 1e-10);
  const auto oracle = oracles::brute_force_povm(alpha, 0.0, cutoff, 60);

  double max_elem = 0.0;
  for (int dn = povm.grid().dn_min; dn <= povm.grid().dn_max; ++dn) {
    const auto it = oracle.find(dn);
    if (it == oracle.end()) {
      max_elem = 1.0;
      break;
    }
    max_elem = std::max(max_elem, (povm.element(dn) - it->second).cwiseAbs().maxCoeff());
  }
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(cutoff + 1, cutoff + 1);
  for (const auto& e : povm.elements()) sum += e;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
      Eigen::MatrixXcd(Eigen::MatrixXcd::Identity(cutoff + 1, cutoff + 1) - sum),
      Eigen::EigenvaluesOnly);
  const double defect = es.eigenvalues().cwiseAbs().maxCoeff();
  const double secs = elapsed(t0);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "max elementwise dev %.2e, completeness defect %.2e, %.1f s",
                max_elem, defect, secs);
  report(4, "POVM oracle equivalence", max_elem <= 1e-9 && defect <= 1e-8 && secs < 10.0,
         buf);
}

void criterion5_u1_covariance() {
  Rng rng(20260811);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int cutoff = 6 + static_cast<int>(rng.raw() % 3);
    Eigen::MatrixXcd g(cutoff + 1, cutoff + 1);
    for (int i = 0; i <= cutoff; ++i)
      for (int j = 0; j <= cutoff; ++j)
        g(i, j) = cd(rng.uniform() - 0.5, rng.uniform() - 0.5);
    Eigen::MatrixXcd m = g * g.adjoint();
    const DensityOperator rho(m / m.trace());
    const double phi = kTwoPi * rng.uniform();
    const double psi = kTwoPi * rng.uniform();
    const QuadratureDistribution lhs = quadrature_distribution(
        phase_rotate(rho, psi), build_povm(2.0, phi + psi, cutoff));
    const QuadratureDistribution rhs =
        quadrature_distribution(rho, build_povm(2.0, phi, cutoff));
    worst = std::max(worst, (lhs.prob - rhs.prob).cwiseAbs().maxCoeff());
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "max per-bin deviation %.2e over 20 random triples", worst);
  report(5, "U(1) covariance", worst <= 1e-10, buf);
}

void criterion6_common_source() {
  Scenario cw;
  cw.kind = ScenarioKind::CommonSourceCW;
  cw.beta = std::sqrt(3.0);
  cw.K = 1;
  cw.theta = {0.0};
  cw.M = 100000;
  cw.seed = 101;
  Scenario pw = cw;
  pw.kind = ScenarioKind::CommonSourcePW;
  pw.seed = 202;

  const QuadratureDataset dcw = run_scenario(cw);
  const QuadratureDataset dpw = run_scenario(pw);
  EmpiricalMeasure mcw = dcw.blocks[0].measure(dcw.grid);
  EmpiricalMeasure mpw = dpw.blocks[0].measure(dpw.grid);
  const double d = two_sample_ks(mcw, mpw);
  const double thresh = two_sample_ks_threshold(cw.M, pw.M, 0.01);

  // code-path assertion: the common-source sampler takes no prior argument
  // (compile-time; see detail::run_common_source) and changing P(phi) leaves
  // every byte of the dataset unchanged
  Eigen::VectorXd skew(720);
  for (int j = 0; j < 720; ++j) skew[j] = 1.0 + 0.9 * std::sin(kTwoPi * j / 720);
  Scenario cw_skew = cw;
  cw_skew.M = 5000;
  Scenario cw_base = cw_skew;
  cw_skew.lo_prior = PhaseDistribution::from_weights(skew);
  bool prior_independent = true;
  const QuadratureDataset a = run_scenario(cw_base);
  const QuadratureDataset b = run_scenario(cw_skew);
  for (std::size_t k = 0; k < a.blocks.size(); ++k)
    prior_independent = prior_independent && a.blocks[k].prob == b.blocks[k].prob;

  char buf[160];
  std::snprintf(buf, sizeof(buf), "KS %.5f vs threshold %.5f; P(phi)-independence %s",
                d, thresh, prior_independent ? "bitwise" : "VIOLATED");
  report(6, "common-source CW = PW", d < thresh && prior_independent, buf);
}

void criterion7_tomography() {
  std::vector<double> th;
  for (int k = 0; k < 16; ++k) th.push_back(M_PI * k / 16);

  const DensityOperator vac = DensityOperator::from_pure(number_state(0, 12));
  const DensityOperator coh =
      DensityOperator::from_pure(coherent_state(cd(std::sqrt(3.0), 0.0)));
  const DensityOperator sq = DensityOperator::from_pure(
      squeezed_coherent_state(-1.0, std::sqrt(3.0) * std::exp(-1.0)));

  bool ok = true;
  std::string detail;
  for (const auto& [name, rho] :
       std::vector<std::pair<std::string, const DensityOperator*>>{
           {"vacuum", &vac}, {"coherent", &coh}, {"squeezed", &sq}}) {
    const QuadratureDataset exact = dataset_from_marginals(*rho, th);
    const double f_exact = state_fidelity(reconstruct_wigner(exact), *rho).overlap;

    QuadratureDataset sampled;
    sampled.grid = exact.grid;
    Rng rng(4000 + detail.size());
    for (const auto& blk : exact.blocks) {
      const QuadratureDistribution model{exact.grid, blk.prob, blk.prob / exact.grid.dx()};
      sampled.blocks.push_back({blk.theta, iid_sample(model, 5000, rng).frequencies(), 5000});
    }
    const double f_sampled = state_fidelity(reconstruct_wigner(sampled), *rho).overlap;

    ok = ok && f_exact > 0.95 && f_sampled > 0.90;
    detail += name + " " + format_double(std::round(f_exact * 1000) / 1000) + "/" +
              format_double(std::round(f_sampled * 1000) / 1000) + "  ";
  }
  report(7, "tomography self-consistency", ok, "exact/sampled fidelities: " + detail);
}

void criterion8_discrimination() {
  DiscriminationParams params;  // beta = sqrt(3), K = 12, M = 5000
  std::atomic<int> cw_correct{0}, pw_correct{0};
  parallel_over(20, [&](int i) {
    const bool is_cw = i < 10;
    const std::uint64_t seed = (i % 10) + 1;
    const DiscriminationReport rep =
        discriminate_cw_pw(is_cw ? LaserKind::CW : LaserKind::PW, params, seed);
    if (is_cw && rep.verdict == "coherent") ++cw_correct;
    if (!is_cw && rep.verdict == "mixed") ++pw_correct;
  });
  char buf[160];
  std::snprintf(buf, sizeof(buf), "CW %d/10 'coherent', PW %d/10 'mixed'", cw_correct.load(),
                pw_correct.load());
  report(8, "CW/PW discrimination", cw_correct >= 9 && pw_correct >= 9, buf);
}

void criterion9_exact_identities() {
  bool ok = true;
  std::string detail;

  // phase average of coherent projectors = diagonal Poissonian state
  {
    const DensityOperator rho = phase_averaged_laser_state(1.7);
    const DensityOperator avg = oracles::discrete_phase_average(1.7, 4 * (rho.cutoff() + 1));
    const double dev = (rho.matrix() - avg.matrix()).cwiseAbs().maxCoeff();
    ok = ok && dev < 1e-10;
    detail += "phase-avg " + format_double(dev) + "; ";
  }
  // uniform-P convolution collapse
  {
    Eigen::VectorXd w(512);
    for (int j = 0; j < 512; ++j) w[j] = std::exp(std::sin(kTwoPi * j / 512) * 2.0);
    const PhaseDistribution out = convolve_phase(PhaseDistribution::from_weights(w),
                                                 PhaseDistribution::uniform(512));
    const double dev = out.log_weights().cwiseAbs().maxCoeff();
    ok = ok && dev < 1e-12;
    detail += "uniform-collapse " + format_double(dev) + "; ";
  }
  // batch vs sequential Bayes and the chain rule
  {
    const DensityOperator rho =
        DensityOperator::from_pure(coherent_state(cd(std::sqrt(3.0), 0.0)));
    const BeamSplitterPOVM povm = build_povm(std::sqrt(15.0), 0.0, rho.cutoff(), 1e-10,
                                             default_x_span(std::sqrt(3.0), 0.0));
    const QuadraturePhaseSeries series(rho, povm);
    const PhaseLikelihoodTable table(series, 512);
    const PhaseDistribution prior = PhaseDistribution::uniform(512);

    SequentialSampler sampler(&table, prior);
    Rng rng(31337);
    DetectionRecord record;
    record.grid = table.grid();
    PhaseDistribution seq = prior;
    Eigen::VectorXd batch_lw = prior.log_weights();
    double chain = 0.0;
    for (int i = 0; i < 120; ++i) {
      const auto [dn, cond] = sampler.step(rng);
      record.outcomes.push_back(dn);
      chain += std::log(cond);
      seq = bayes_update(seq, table.likelihood_row(dn));
      batch_lw += table.log_likelihood_row(dn);
    }
    const double bdev = (seq.log_weights() -
                         PhaseDistribution::from_log_weights(batch_lw).log_weights())
                            .cwiseAbs()
                            .maxCoeff();
    const double cdev = std::fabs(chain - joint_log_probability(record, prior, table));
    ok = ok && bdev < 1e-9 && cdev < 1e-8;
    detail += "batch-vs-seq " + format_double(bdev) + "; chain-rule " + format_double(cdev);
  }
  report(9, "exact identities", ok, detail);
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  const Fig2Setup fig;
  criteria_fig2(fig);
  criterion3_scaling();
  criterion4_povm_oracle();
  criterion5_u1_covariance();
  criterion6_common_source();
  criterion7_tomography();
  criterion8_discrimination();
  criterion9_exact_identities();
  std::printf("%s: %d criterion failure(s), %.0f s total\n", failures == 0 ? "OK" : "FAILED",
              failures, elapsed(t0));
  return failures == 0 ? 0 : 1;
}
