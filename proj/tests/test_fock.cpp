#include <catch2/catch_amalgamated.hpp>

#include "homsim/fock.hpp"
#include "oracles.hpp"

using namespace homsim;

TEST_CASE("coherent state basics") {
  SECTION("alpha = 0 is the vacuum") {
    const FockVector v = coherent_state(cd(0.0, 0.0));
    REQUIRE(std::abs(v.amplitude(0) - cd(1.0, 0.0)) < 1e-15);
    for (int n = 1; n <= v.cutoff(); ++n) REQUIRE(std::abs(v.amplitude(n)) == 0.0);
  }

  SECTION("mean photon number is |alpha|^2") {
    const FockVector v = coherent_state(cd(std::sqrt(15.0), 0.0), {1e-12});
    REQUIRE(v.mean_photon_number() == Catch::Approx(15.0).margin(1e-9));
  }

  SECTION("cutoff rule dominates the exact Poisson tail requirement") {
    const TruncationPolicy policy{1e-12};
    const FockVector v = coherent_state(cd(std::sqrt(15.0), 0.0), policy);
    const int needed = oracles::poisson_min_cutoff(15.0, 1e-12);
    REQUIRE(v.cutoff() >= needed);
    REQUIRE(oracles::poisson_tail_above(15.0, v.cutoff()) <= 1e-12);
    REQUIRE(std::fabs(v.norm_sq() - 1.0) <= policy.tail_tolerance);
  }

  SECTION("Poissonian photon statistics: variance equals mean") {
    const FockVector v = coherent_state(cd(2.0, 0.5));
    const Eigen::VectorXd p = v.photon_distribution();
    double mean = 0.0, second = 0.0;
    for (int n = 0; n < p.size(); ++n) {
      mean += n * p[n];
      second += double(n) * n * p[n];
    }
    REQUIRE(second - mean * mean == Catch::Approx(mean).margin(1e-8));
  }

  SECTION("invalid tolerance rejected") {
    REQUIRE_THROWS_AS(coherent_state(cd(1.0, 0.0), TruncationPolicy{0.0}), ConfigError);
    TruncationPolicy tiny;
    tiny.hard_max = 8;
    REQUIRE_THROWS_AS(coherent_state(cd(5.0, 0.0), tiny), ToleranceError);
  }
}

TEST_CASE("phase-averaged laser state") {
  SECTION("magnitude 0 gives |0><0|") {
    const DensityOperator rho = phase_averaged_laser_state(0.0);
    REQUIRE(std::abs(rho.matrix()(0, 0) - cd(1.0, 0.0)) < 1e-15);
    REQUIRE(rho.matrix().cwiseAbs().sum() == Catch::Approx(1.0).margin(1e-15));
  }

  SECTION("equals the uniform phase average of coherent projectors") {
    const double mag = 1.7;
    const DensityOperator rho = phase_averaged_laser_state(mag);
    const DensityOperator avg =
        oracles::discrete_phase_average(mag, 4 * (rho.cutoff() + 1));
    REQUIRE((rho.matrix() - avg.matrix()).cwiseAbs().maxCoeff() < 1e-10);
  }

  SECTION("diagonal sums to 1 minus the Poisson tail") {
    const DensityOperator rho = phase_averaged_laser_state(2.0);
    const double tail = oracles::poisson_tail_above(4.0, rho.cutoff());
    REQUIRE(rho.trace() == Catch::Approx(1.0 - tail).margin(1e-13));
    rho.validate(1e-10);
  }

  SECTION("off-diagonals are exactly zero") {
    const DensityOperator rho = phase_averaged_laser_state(1.3);
    for (int n = 0; n <= rho.cutoff(); ++n)
      for (int m = 0; m <= rho.cutoff(); ++m)
        if (n != m) REQUIRE(std::abs(rho.matrix()(n, m)) == 0.0);
  }
}

TEST_CASE("squeezed coherent state") {
  SECTION("r = 0 reproduces the coherent state") {
    const FockVector sq = squeezed_coherent_state(0.0, 1.4);
    const FockVector coh = coherent_state(cd(1.4, 0.0));
    for (int n = 0; n <= std::min(sq.cutoff(), coh.cutoff()); ++n)
      REQUIRE(std::abs(sq.amplitude(n) - coh.amplitude(n)) < 1e-12);
  }

  SECTION("Fig. 2 parameters give quadrature mean sqrt(6)") {
    const FockVector sq = squeezed_coherent_state(-1.0, std::sqrt(3.0) * std::exp(-1.0));
    const double mean_x = std::sqrt(2.0) * sq.ladder_expectation().real();
    REQUIRE(mean_x == Catch::Approx(std::sqrt(6.0)).margin(1e-9));
  }

  SECTION("matches the matrix-exponential construction") {
    for (auto [r, beta] : std::vector<std::pair<double, double>>{
             {0.3, 0.8}, {-0.5, 1.2}, {1.0, 0.5}, {-1.0, std::sqrt(3.0) * std::exp(-1.0)}}) {
      const FockVector st = squeezed_coherent_state(r, beta);
      const int n_max = std::max(40, st.cutoff());
      const Eigen::VectorXcd oracle = oracles::matexp_squeezed(r, beta, n_max);
      cd ov = 0.0;
      for (int n = 0; n <= std::min<int>(st.cutoff(), n_max); ++n)
        ov += std::conj(oracle[n]) * st.amplitude(n);
      REQUIRE(std::norm(ov) > 1.0 - 1e-8);
    }
  }

  SECTION("quadrature variance follows e^{-2r}/2") {
    for (double r : {-0.8, 0.0, 0.6}) {
      const FockVector st = squeezed_coherent_state(r, 0.9);
      cd a2 = 0.0;
      for (int n = 0; n + 2 <= st.cutoff(); ++n)
        a2 += std::conj(st.amplitude(n)) * std::sqrt(double((n + 1) * (n + 2))) *
              st.amplitude(n + 2);
      const double mx = std::sqrt(2.0) * st.ladder_expectation().real();
      const double x2 = (2.0 * a2.real() + 2.0 * st.mean_photon_number() + 1.0) / 2.0;
      REQUIRE(x2 - mx * mx == Catch::Approx(std::exp(-2.0 * r) / 2.0).margin(1e-9));
    }
  }

  SECTION("|r| > 3 rejected") {
    REQUIRE_THROWS_AS(squeezed_coherent_state(3.5, 0.1), ConfigError);
  }
}

TEST_CASE("phase rotation") {
  const FockVector v = coherent_state(cd(1.2, 0.7));

  SECTION("phi = 0 and phi = 2pi are identities") {
    const FockVector r0 = phase_rotate(v, 0.0);
    const FockVector r2pi = phase_rotate(v, kTwoPi);
    for (int n = 0; n <= v.cutoff(); ++n) {
      REQUIRE(std::abs(r0.amplitude(n) - v.amplitude(n)) == 0.0);
      REQUIRE(std::abs(r2pi.amplitude(n) - v.amplitude(n)) < 1e-12);
    }
  }

  SECTION("rotated coherent state is coherent with rotated amplitude") {
    const double phi = 0.83;
    const FockVector rot = phase_rotate(v, phi);
    const FockVector direct = coherent_state(cd(1.2, 0.7) * std::polar(1.0, phi));
    REQUIRE(fidelity(rot, direct) > 1.0 - 1e-10);
  }

  SECTION("photon distribution is preserved exactly") {
    const FockVector rot = phase_rotate(v, 1.234);
    REQUIRE((rot.photon_distribution() - v.photon_distribution()).cwiseAbs().maxCoeff() <
            1e-15);
  }

  SECTION("density operator rotation preserves trace") {
    const DensityOperator rho = phase_averaged_laser_state(1.1);
    const DensityOperator rot = phase_rotate(rho, 0.4);
    REQUIRE(rot.trace() == Catch::Approx(rho.trace()).margin(1e-14));
  }
}

TEST_CASE("quadrature wavefunctions") {
  SECTION("ground state") {
    for (double x : {-2.0, 0.0, 0.7, 3.1}) {
      REQUIRE(quadrature_wavefunction(0, x) ==
              Catch::Approx(std::pow(M_PI, -0.25) * std::exp(-0.5 * x * x)).margin(1e-14));
    }
  }

  SECTION("orthonormality under numerical quadrature") {
    const int n_pts = 4001;
    const double span = 12.0, h = 2.0 * span / (n_pts - 1);
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(21, 21);
    for (int i = 0; i < n_pts; ++i) {
      const double x = -span + i * h;
      const Eigen::VectorXd psi = quadrature_wavefunctions(20, x);
      const double w = (i == 0 || i == n_pts - 1) ? 0.5 : 1.0;
      gram += w * h * psi * psi.transpose();
    }
    for (int n = 0; n <= 20; ++n)
      for (int m = 0; m <= 20; ++m)
        REQUIRE(gram(n, m) == Catch::Approx(n == m ? 1.0 : 0.0).margin(1e-6));
  }

  SECTION("batch evaluation matches single") {
    const Eigen::VectorXd batch = quadrature_wavefunctions(30, 1.37);
    for (int n = 0; n <= 30; ++n)
      REQUIRE(batch[n] == Catch::Approx(quadrature_wavefunction(n, 1.37)).margin(1e-13));
  }
}

TEST_CASE("density operator validation") {
  const DensityOperator good = DensityOperator::from_pure(coherent_state(cd(1.0, 0.0)));
  REQUIRE_NOTHROW(good.validate());

  Eigen::MatrixXcd bad = good.matrix();
  bad(0, 1) += cd(0.0, 1e-6);
  REQUIRE_THROWS_AS(DensityOperator(bad).validate(), ToleranceError);
}
