// Minimal tour: build a coherent signal, measure it against a coherent LO,
// and print the photon-number-difference distribution next to the strong-LO
// limit.

#include <cstdio>

#include "homsim/homodyne.hpp"

int main() {
  using namespace homsim;
  const double alpha = std::sqrt(15.0);
  const double beta = 1.0;

  const DensityOperator rho = DensityOperator::from_pure(coherent_state(cd(beta, 0.0)));
  const BeamSplitterPOVM povm =
      build_povm(alpha, 0.0, rho.cutoff(), 1e-10, default_x_span(beta, 0.0));
  const QuadratureDistribution dist = quadrature_distribution(rho, povm);

  Eigen::VectorXd xs(dist.grid.size());
  for (int i = 0; i < xs.size(); ++i) xs[i] = dist.grid.x(dist.grid.dn_min + i);
  const Eigen::VectorXd limit = strong_lo_density(rho, 0.0, xs);

  std::printf("%8s %12s %12s\n", "x", "density", "strong-LO");
  for (int i = 0; i < xs.size(); i += 4)
    std::printf("%8.3f %12.6f %12.6f\n", xs[i], dist.density[i], limit[i]);
  std::printf("mean x = %.6f (expect sqrt(2) beta = %.6f)\n", dist.mean_x(),
              std::sqrt(2.0) * beta);
  return 0;
}
