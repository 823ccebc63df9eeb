#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "edyn/config_space.hpp"
#include "edyn/kernel.hpp"

#include <cmath>

using namespace edyn;

namespace {

Scenario two_particle_scenario() {
  Scenario s;
  s.n_particles = 2;
  s.spatial_dim = 1;
  s.masses = VectorXd(2);
  s.masses << 1.0, 3.0;
  s.charges = VectorXd::Ones(2);
  s.eta = 0.7;
  s.dt = 2e-3;
  s.potential = Potential::free();
  return s;
}

// log of the maxent normalization zeta(alpha, beta) =
// int dDx exp(-alpha/2 |Dx|^2 + beta . Dx), by 1d product quadrature.
double log_zeta_quadrature(double alpha, const VectorXd& beta) {
  const int n = 4000;
  const double half = 12.0 / std::sqrt(alpha);  // +- 12 sigma
  const double h = 2.0 * half / n;
  double log_total = 0.0;
  for (Eigen::Index a = 0; a < beta.size(); ++a) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      // Center the quadrature window on the mean beta/alpha.
      const double x = beta[a] / alpha - half + (i + 0.5) * h;
      acc += std::exp(-0.5 * alpha * x * x + beta[a] * x);
    }
    log_total += std::log(acc * h);
  }
  return log_total;
}

}  // namespace

TEST_CASE("mass tensor diagonal, inverse and total") {
  const Scenario s = two_particle_scenario();
  const MassTensor t = build_mass_tensors(s);
  REQUIRE(t.diag.size() == 2);
  CHECK(t.diag[0] == 1.0);
  CHECK(t.diag[1] == 3.0);
  CHECK(t.inverse_diag[0] == 1.0);
  CHECK(t.inverse_diag[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(t.total_mass == 4.0);
}

TEST_CASE("mass tensor replicates per spatial coordinate") {
  Scenario s = two_particle_scenario();
  s.spatial_dim = 2;
  const MassTensor t = build_mass_tensors(s);
  REQUIRE(t.diag.size() == 4);
  CHECK(t.diag[0] == 1.0);
  CHECK(t.diag[1] == 1.0);
  CHECK(t.diag[2] == 3.0);
  CHECK(t.diag[3] == 3.0);
  CHECK((t.diag.cwiseProduct(t.inverse_diag).array() == 1.0).all());
}

TEST_CASE("information metric matches its Gaussian variance, by quadrature") {
  // gamma_AB should be the precision of the short-step displacement law:
  // <Dx_A^2> under exp(-gamma/2 Dx^2) equals 1/gamma. Quadrature oracle,
  // run at high precision (alpha >= 100) so domain truncation is negligible.
  const Scenario s = two_particle_scenario();
  const VectorXd gamma = info_metric(s, 1.0);  // gamma = m / (eta dt)
  for (Eigen::Index A = 0; A < gamma.size(); ++A) {
    REQUIRE(gamma[A] >= 100.0);
    const int n = 20000;
    const double half = 10.0 / std::sqrt(gamma[A]);
    const double h = 2.0 * half / n;
    double z = 0.0, second = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = -half + (i + 0.5) * h;
      const double w = std::exp(-0.5 * gamma[A] * x * x);
      z += w;
      second += w * x * x;
    }
    CHECK(second / z == doctest::Approx(1.0 / gamma[A]).epsilon(1e-6));
  }
  // Closed form for C = 1: gamma = m / (eta dt).
  CHECK(gamma[0] == doctest::Approx(1.0 / (s.eta * s.dt)).epsilon(1e-12));
  CHECK(gamma[1] == doctest::Approx(3.0 / (s.eta * s.dt)).epsilon(1e-12));
}

TEST_CASE("information metric scales with C and 1/(eta dt)") {
  const Scenario s = two_particle_scenario();
  const VectorXd g1 = info_metric(s, 1.0);
  const VectorXd g2 = info_metric(s, 2.0);
  CHECK((g2 - 2.0 * g1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(g1[0] == doctest::Approx(1.0 / (s.eta * s.dt)).epsilon(1e-12));
  CHECK_THROWS_AS(info_metric(s, 0.0), std::invalid_argument);
}

TEST_CASE("kappa recovery agrees with -2 d(log zeta)/d(alpha)") {
  // Multiplier-to-constraint map: kappa_n = d/alpha_n + |<Dx_n>|^2, checked
  // against a central difference of the quadrature log-normalizer at fixed
  // Lagrange multiplier beta = alpha * mean.
  for (int d : {1, 2}) {
    const double alpha = 180.0;
    VectorXd mean(d);
    for (int a = 0; a < d; ++a) mean[a] = 0.03 * (a + 1);
    TransitionKernel k;
    k.base = VectorXd::Zero(d);
    k.mean = mean;
    k.variance = VectorXd::Constant(d, 1.0 / alpha);
    k.dt = 1e-3;
    const VectorXd kappa =
        kappa_from_alpha(VectorXd::Constant(1, alpha), k, d);
    const VectorXd beta = alpha * mean;
    const double h = alpha * 1e-4;
    const double fd = -2.0 *
                      (log_zeta_quadrature(alpha + h, beta) -
                       log_zeta_quadrature(alpha - h, beta)) /
                      (2.0 * h);
    CHECK(kappa[0] == doctest::Approx(fd).epsilon(1e-6));
    CHECK(kappa[0] ==
          doctest::Approx(d / alpha + mean.squaredNorm()).epsilon(1e-12));
  }
}

TEST_CASE("kappa recovery rejects non-positive multipliers") {
  TransitionKernel k;
  k.base = VectorXd::Zero(1);
  k.mean = VectorXd::Zero(1);
  k.variance = VectorXd::Ones(1);
  CHECK_THROWS_AS(kappa_from_alpha(VectorXd::Constant(1, -1.0), k, 1),
                  std::invalid_argument);
}
