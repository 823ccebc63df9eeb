#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "edyn/ensemble.hpp"
#include "edyn/fields.hpp"

#include <cmath>

using namespace edyn;

namespace {

// eta = 1, xi = 1/8 so hbar = 1 throughout.
Scenario free_scenario() {
  Scenario s;
  s.n_particles = 1;
  s.spatial_dim = 1;
  s.masses = VectorXd::Ones(1);
  s.charges = VectorXd::Ones(1);
  s.eta = 1.0;
  s.xi = 0.125;
  s.dt = 1e-3;
  s.potential = Potential::free();
  // dx = 1/16 resolves the gate-crossing log-slope of the unit Gaussian;
  // field steps below use dt = 2e-4 <~ 0.06 dx^2 m / hbar (Nyquist dispersion).
  s.grid = Grid::make1d(512, -16.0, 16.0);
  s.initial.type = "gaussian";
  s.initial.sigma = 1.0;
  s.initial.center = VectorXd::Zero(1);
  s.initial.momentum = VectorXd::Zero(1);
  return s;
}

Scenario harmonic_scenario(double omega = 1.0) {
  Scenario s = free_scenario();
  s.grid = Grid::make1d(256, -6.0, 6.0);
  s.potential = Potential::harmonic(omega, s.mass_per_coord());
  s.initial.type = "ground";
  s.initial.omega = omega;
  return s;
}

double variance(const FieldState& st) {
  const ArrayXd x = st.grid.coord_field(0);
  const double mu = st.grid.integrate(st.rho * x);
  return st.grid.integrate(st.rho * (x - mu) * (x - mu));
}

}  // namespace

TEST_CASE("initial states are normalized and carry the requested moments") {
  Scenario s = free_scenario();
  s.initial.momentum = VectorXd::Constant(1, 0.6);
  const FieldState st = initial_state(s);
  CHECK(st.grid.integrate(st.rho) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(variance(st) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(st.ramp[0] == 0.6);
  CHECK(momentum_expectation(st, s)[0] == doctest::Approx(0.6).epsilon(1e-12));

  Scenario h = harmonic_scenario(2.0);
  const FieldState g = initial_state(h);
  // Ground width sigma^2 = hbar / (2 m omega).
  CHECK(variance(g) == doctest::Approx(1.0 / 4.0).epsilon(1e-10));

  Scenario u = free_scenario();
  u.initial.type = "uniform";
  const FieldState us = initial_state(u);
  CHECK(us.rho.maxCoeff() == doctest::Approx(1.0 / 32.0).epsilon(1e-13));
}

TEST_CASE("continuity rhs: plane-wave flow of a Gaussian, against the closed form") {
  Scenario s = free_scenario();
  s.masses[0] = 2.0;
  s.initial.momentum = VectorXd::Constant(1, 0.8);
  const FieldState st = initial_state(s);
  const ArrayXd rhs = continuity_rhs(st, s, std::nullopt);
  // d_t rho = -(p/m) rho' = (p/m) x rho for the unit Gaussian.
  const ArrayXd x = st.grid.coord_field(0);
  const ArrayXd expect = (0.8 / 2.0) * x * st.rho;
  // The closed form holds where the gate weight is 1; the crossover band
  // (|x| beyond ~4.9 here) carries the designed w^3 flux deficit.
  double core = 0.0;
  for (Eigen::Index i = 0; i < st.grid.size(); ++i)
    if (std::abs(x[i]) <= 4.0) core = std::max(core, std::abs(rhs[i] - expect[i]));
  CHECK(core < 1e-10);
  CHECK((rhs - expect).abs().maxCoeff() < 1e-6);
}

TEST_CASE("continuity rhs vanishes for uniform density and uniform flow") {
  Scenario s = free_scenario();
  s.initial.type = "uniform";
  s.initial.momentum = VectorXd::Constant(1, 1.5);
  const FieldState st = initial_state(s);
  CHECK(continuity_rhs(st, s, std::nullopt).abs().maxCoeff() < 1e-13);
}

TEST_CASE("Hamilton-Jacobi rhs equals the quantum potential for a resting Gaussian") {
  Scenario s = free_scenario();
  const FieldState st = initial_state(s);
  const ArrayXd rhs = hamilton_jacobi_rhs(st, s, std::nullopt);
  // sqrt(rho) ~ exp(-x^2/4): (hbar^2/2) s''/s = (x^2/4 - 1/2)/2. The lift
  // crossing in the far tail is a marginally resolved feature whose spectral
  // ringing floats the whole profile at the ~1e-6 level.
  const Eigen::Index mid = st.grid.size() / 2;
  CHECK(st.grid.point(mid)[0] == 0.0);
  CHECK(rhs[mid] == doctest::Approx(-0.25).epsilon(1e-5));
  for (double x : {0.5, 1.0, 2.5}) {
    const Eigen::Index i = mid + static_cast<Eigen::Index>(x / st.grid.dx(0));
    CHECK(rhs[i] ==
          doctest::Approx(0.5 * (x * x / 4.0 - 0.5)).epsilon(1e-5));
  }
}

TEST_CASE("Hamilton-Jacobi rhs subtracts the scalar potential") {
  Scenario s = harmonic_scenario();
  const FieldState st = initial_state(s);
  const ArrayXd rhs = hamilton_jacobi_rhs(st, s, std::nullopt);
  // Eigenvalue identity: -V + Q = -hbar omega / 2 pointwise on the support.
  // The gate weight deviates from 1 by the erf tail, which grows with |x|,
  // so the check bands loosen outward (rho/rho_max = e^{-x^2} here).
  for (Eigen::Index i = 0; i < st.grid.size(); ++i) {
    const double ax = std::abs(st.grid.point(i)[0]);
    if (ax <= 1.0)
      CHECK(rhs[i] == doctest::Approx(-0.5).epsilon(1e-6));
    else if (ax <= 2.0)
      CHECK(rhs[i] == doctest::Approx(-0.5).epsilon(1e-5));
    else if (ax <= 2.5)
      CHECK(rhs[i] == doctest::Approx(-0.5).epsilon(1e-3));
  }
}

TEST_CASE("split support raises a singularity error") {
  Scenario s = free_scenario();
  FieldState st = initial_state(s);
  // Two bumps with a hard gap: the quantum term is undefined across it.
  for (Eigen::Index i = 0; i < st.grid.size(); ++i) {
    const double x = st.grid.point(i)[0];
    st.rho[i] = std::exp(-0.5 * (std::abs(x) - 5.0) * (std::abs(x) - 5.0));
    if (std::abs(x) < 2.0) st.rho[i] = 0.0;
  }
  st.rho /= st.grid.integrate(st.rho);
  CHECK_THROWS_AS(
      step_fields(st, s, std::nullopt, Integrator::Leapfrog, 2e-4),
      SingularityError);
}

TEST_CASE("support mask components and fill") {
  const Grid g = Grid::make1d(32, 0.0, 32.0);
  Eigen::Array<bool, Eigen::Dynamic, 1> valid(g.size());
  valid.setConstant(true);
  CHECK(support_components(g, valid) == 1);
  for (int i = 8; i < 12; ++i) valid[i] = false;
  // Periodic wrap keeps the remainder connected.
  CHECK(support_components(g, valid) == 1);
  for (int i = 20; i < 24; ++i) valid[i] = false;
  CHECK(support_components(g, valid) == 2);
  ArrayXd f = ArrayXd::Zero(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) f[i] = valid[i] ? 7.0 : -1.0;
  fill_from_support(g, f, valid);
  CHECK((f == 7.0).all());
}

TEST_CASE("harmonic ground state is stationary under the leapfrog integrator") {
  Scenario s = harmonic_scenario();
  FieldState st = initial_state(s);
  const ArrayXd rho0 = st.rho;
  const double h0 = ensemble_hamiltonian(st, s, std::nullopt).total;
  CHECK(h0 == doctest::Approx(0.5).epsilon(1e-8));  // hbar omega / 2
  for (int i = 0; i < 5000; ++i)
    st = step_fields(st, s, std::nullopt, Integrator::Leapfrog, 2e-4);
  // The gate intrusion into the skirt makes the analytic ground state only
  // near-stationary for the gated Hamiltonian; the residual drives a slow
  // density wobble at the 1e-6 level while H stays conserved.
  CHECK((st.rho - rho0).abs().maxCoeff() < 1e-5);
  const double h1 = ensemble_hamiltonian(st, s, std::nullopt).total;
  CHECK(std::abs(h1 - h0) < 1e-10);
  // Phase decreases at the eigenvalue rate: Phi = -E t.
  const Eigen::Index mid = st.grid.size() / 2;
  CHECK(st.phi_grid[mid] == doctest::Approx(-0.5 * 1.0).epsilon(1e-6));
}

TEST_CASE("free Gaussian spreads by the analytic variance law") {
  Scenario s = free_scenario();
  FieldState st = initial_state(s);
  for (int i = 0; i < 5000; ++i)
    st = step_fields(st, s, std::nullopt, Integrator::Leapfrog, 2e-4);
  // sigma^2(t) = sigma0^2 + (hbar t / 2 m sigma0)^2 = 1 + t^2/4.
  CHECK(variance(st) == doctest::Approx(1.25).epsilon(1e-3));
  CHECK(st.grid.integrate(st.rho) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(momentum_expectation(st, s)[0]) < 1e-8);
}

TEST_CASE("leapfrog and RK4 agree on a short run") {
  Scenario s = harmonic_scenario();
  s.initial.center = VectorXd::Constant(1, 0.5);
  FieldState a = initial_state(s);
  FieldState b = a;
  for (int i = 0; i < 50; ++i) {
    a = step_fields(a, s, std::nullopt, Integrator::Leapfrog, 2e-4);
    b = step_fields(b, s, std::nullopt, Integrator::RK4, 2e-4);
  }
  CHECK((a.rho - b.rho).abs().maxCoeff() < 1e-8);
}

TEST_CASE("leapfrog is second order in time") {
  // Gate-free configuration (density bounded well above the gate window
  // everywhere) so the error floor of the tail treatment cannot mask the
  // dt^2 signal: a sloshing cosine perturbation on a uniform background.
  Scenario s = free_scenario();
  s.grid = Grid::make1d(64, 0.0, 2.0 * M_PI);
  s.initial.type = "uniform";
  FieldState st0 = initial_state(s);
  for (Eigen::Index i = 0; i < st0.grid.size(); ++i) {
    const double x = st0.grid.point(i)[0];
    st0.rho[i] *= 1.0 + 0.3 * std::cos(x);
    st0.phi_grid[i] = 0.1 * std::sin(x);
  }
  st0.rho /= st0.grid.integrate(st0.rho);
  auto evolve = [&](double dt) {
    FieldState st = st0;
    const int n = static_cast<int>(std::round(0.1 / dt));
    for (int i = 0; i < n; ++i)
      st = step_fields(st, s, std::nullopt, Integrator::Leapfrog, dt);
    return st;
  };
  const FieldState ref = evolve(2.5e-5);
  const double e1 = (evolve(4e-4).rho - ref.rho).abs().maxCoeff();
  const double e2 = (evolve(2e-4).rho - ref.rho).abs().maxCoeff();
  const double order = std::log2(e1 / e2);
  CHECK(order >= 1.9);
}

TEST_CASE("Fisher information of Gaussians, with translation invariance") {
  const Grid g = Grid::make1d(256, -16.0, 16.0);
  auto gauss = [&](double mu, double s2) {
    ArrayXd rho(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const double d = g.point(i)[0] - mu;
      rho[i] = std::exp(-0.5 * d * d / s2);
    }
    return ArrayXd(rho / g.integrate(rho));
  };
  CHECK(fisher_information(g, gauss(0.0, 1.0))(0, 0) ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(fisher_information(g, gauss(0.0, 4.0))(0, 0) ==
        doctest::Approx(0.25).epsilon(1e-6));
  CHECK(fisher_information(g, gauss(2.5, 1.0))(0, 0) ==
        doctest::Approx(1.0).epsilon(1e-6));

  const Grid g2 = Grid::make2d(64, 64, {-12.0, -12.0}, {12.0, 12.0});
  ArrayXd rho2(g2.size());
  for (Eigen::Index i = 0; i < g2.size(); ++i) {
    const VectorXd x = g2.point(i);
    rho2[i] = std::exp(-x[0] * x[0] / 8.0 - x[1] * x[1] / 2.0);
  }
  rho2 /= g2.integrate(rho2);
  const Eigen::MatrixXd I = fisher_information(g2, rho2);
  CHECK(I(0, 0) == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(I(1, 1) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(I(0, 1)) < 1e-10);
}

TEST_CASE("quantum energy equals the Fisher contraction on the same quadrature") {
  // xi m^AB I_AB must coincide with 4 xi int m^AB d_A sqrt(rho) d_B sqrt(rho)
  // when both sides use the grid's own derivative and quadrature rules.
  Scenario s = free_scenario();
  s.xi = 0.2;
  const FieldState st = initial_state(s);
  const HamiltonianReport r = ensemble_hamiltonian(st, s, std::nullopt);
  const ArrayXd sq = st.rho.sqrt();
  const ArrayXd ds = st.grid.deriv(sq, 0);
  const auto valid = support_mask(st.rho);
  ArrayXd integrand = ArrayXd::Zero(st.grid.size());
  for (Eigen::Index i = 0; i < st.grid.size(); ++i)
    if (valid[i]) integrand[i] = ds[i] * ds[i];
  const double direct = 4.0 * s.xi * st.grid.integrate(integrand);
  CHECK(r.quantum == doctest::Approx(direct).epsilon(1e-10));
  CHECK(r.quantum == doctest::Approx(s.xi * 1.0).epsilon(1e-6));  // I = 1/sigma^2
}

TEST_CASE("free Gaussian Hamiltonian is pure quantum energy, value xi/sigma^2") {
  Scenario s = free_scenario();
  const FieldState st = initial_state(s);
  const HamiltonianReport r = ensemble_hamiltonian(st, s, std::nullopt);
  CHECK(r.kinetic == 0.0);
  CHECK(r.potential == 0.0);
  CHECK(r.total == doctest::Approx(0.125).epsilon(1e-6));  // 1/8
}

TEST_CASE("functional derivatives pass a central-difference check") {
  Scenario s = harmonic_scenario();
  s.initial.center = VectorXd::Constant(1, 0.4);
  s.initial.momentum = VectorXd::Constant(1, 0.3);
  const FieldState st = initial_state(s);
  const Grid& g = st.grid;
  // Smooth localized test directions. drho = d(f rho)/dx is mass neutral and
  // falls off with rho, so rho +- eps drho stays positive.
  ArrayXd f(g.size()), dphi(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double x = g.point(i)[0];
    f[i] = std::exp(-(x - 0.3) * (x - 0.3));
    dphi[i] = std::exp(-(x - 0.5) * (x - 0.5));
  }
  const ArrayXd drho = g.deriv(f * st.rho, 0);
  const double eps = 1e-5;
  auto h_of = [&](const ArrayXd& rho, const ArrayXd& phi) {
    FieldState t = st;
    t.rho = rho;
    t.phi_grid = phi;
    return ensemble_hamiltonian(t, s, std::nullopt).total;
  };
  const double fd_rho =
      (h_of(st.rho + eps * drho, st.phi_grid) -
       h_of(st.rho - eps * drho, st.phi_grid)) /
      (2.0 * eps);
  const double an_rho = g.integrate(dH_drho(st, s, std::nullopt) * drho);
  CHECK(fd_rho == doctest::Approx(an_rho).epsilon(1e-5));
  const double fd_phi =
      (h_of(st.rho, st.phi_grid + eps * dphi) -
       h_of(st.rho, st.phi_grid - eps * dphi)) /
      (2.0 * eps);
  const double an_phi = g.integrate(dH_dphi(st, s, std::nullopt) * dphi);
  CHECK(fd_phi == doctest::Approx(an_phi).epsilon(1e-5));
}

TEST_CASE("Poisson bracket: antisymmetry and the momentum equation of motion") {
  Scenario s = harmonic_scenario();
  s.initial.center = VectorXd::Constant(1, 0.7);
  const FieldState st = initial_state(s);
  const Grid& g = st.grid;
  // P~ = int rho dPhi: dP/drho = dPhi, dP/dPhi = -drho.
  const ArrayXd dp_drho = st.grad_phi(0);
  const ArrayXd dp_dphi = -g.deriv(st.rho, 0);
  const ArrayXd dh_rho = dH_drho(st, s, std::nullopt);
  const ArrayXd dh_phi = dH_dphi(st, s, std::nullopt);
  const double ph = poisson_bracket(g, dp_drho, dp_dphi, dh_rho, dh_phi);
  const double hp = poisson_bracket(g, dh_rho, dh_phi, dp_drho, dp_dphi);
  CHECK(ph == doctest::Approx(-hp).epsilon(1e-12));
  // {P, H} = -<dV/dx> = -m omega^2 <x>.
  const ArrayXd x = g.coord_field(0);
  const double expect = -g.integrate(st.rho * x);
  CHECK(ph == doctest::Approx(expect).epsilon(1e-6));
  // And it matches the measured dP/dt along the flow.
  FieldState fwd = st, bwd = st;
  const double dt = 1e-4;
  fwd = step_fields(fwd, s, std::nullopt, Integrator::RK4, dt);
  for (int i = 0; i < 2; ++i)
    bwd = step_fields(bwd, s, std::nullopt, Integrator::RK4, -dt / 2);
  const double dpdt = (momentum_expectation(fwd, s)[0] -
                       momentum_expectation(bwd, s)[0]) /
                      (2.0 * dt);
  CHECK(dpdt == doctest::Approx(ph).epsilon(1e-5));
}

TEST_CASE("energy balance closes for a driven potential") {
  Scenario s = harmonic_scenario();
  s.potential = Potential::driven(0.5, 3.0);
  std::vector<FieldState> traj{initial_state(s)};
  for (int i = 0; i < 1000; ++i)
    traj.push_back(
        step_fields(traj.back(), s, std::nullopt, Integrator::Leapfrog, 2e-4));
  const BalanceReport r = energy_balance(traj, s, std::nullopt);
  CHECK(std::abs(r.h_final - r.h_initial) > 1e-5);  // work was actually done
  CHECK(r.residual < 1e-6);
}

TEST_CASE("energy balance closes for a time-ramped vector potential") {
  Scenario s = free_scenario();
  s.gauge = GaugeField::ramp(VectorXd::Constant(1, 0.4), 2.0, s.charges, s.eta,
                             s.spatial_dim);
  std::vector<FieldState> traj{initial_state(s)};
  for (int i = 0; i < 500; ++i)
    traj.push_back(
        step_fields(traj.back(), s, s.gauge, Integrator::Leapfrog, 2e-4));
  const BalanceReport r = energy_balance(traj, s, s.gauge);
  CHECK(std::abs(r.h_final - r.h_initial) > 1e-5);
  CHECK(r.residual < 1e-6);
}

TEST_CASE("velocity decomposition matches the closed forms and the kernel drift") {
  Scenario s = free_scenario();
  s.masses[0] = 2.0;
  s.initial.momentum = VectorXd::Constant(1, 0.9);
  const FieldState st = initial_state(s);
  const VelocityFields vf = velocity_fields(st, s, std::nullopt);
  const Grid& g = st.grid;
  const Eigen::Index mid = g.size() / 2;
  for (Eigen::Index i = mid - 30; i <= mid + 30; ++i) {
    const double x = g.point(i)[0];
    CHECK(vf.current[0][i] == doctest::Approx(0.9 / 2.0).epsilon(1e-8));
    // u = -eta m^-1 d log sqrt(rho) = eta x / (2 m sigma^2).
    CHECK(vf.osmotic[0][i] ==
          doctest::Approx(x / 4.0).epsilon(1e-6).scale(1.0));
    CHECK(vf.drift[0][i] ==
          doctest::Approx(vf.current[0][i] - vf.osmotic[0][i]).epsilon(1e-12));
  }
  // Kernel built from the same state must carry the drift velocity b.
  const DriftPotential phi = drift_potential_from_fields(st, s);
  const TransitionKernel k =
      build_kernel(g.point(mid), phi, std::nullopt, s);
  CHECK(k.mean[0] / s.dt ==
        doctest::Approx(vf.drift[0][mid]).epsilon(1e-8).scale(1.0));
}

TEST_CASE("the analytic eigenstate trajectory makes the action stationary") {
  Scenario s = harmonic_scenario();
  const FieldState base = initial_state(s);
  const Grid& g = base.grid;
  const int J = 21;
  const double T = 1.0, h = T / (J - 1);
  auto trajectory = [&](double eps) {
    // rho_j = rho0 + eps s_j drho, Phi_j = -E t_j + eps s_j dphi, with a
    // time profile vanishing at the endpoints.
    std::vector<FieldState> traj;
    ArrayXd f(g.size()), dphi(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const double x = g.point(i)[0];
      f[i] = std::exp(-x * x / 2.0);
      dphi[i] = std::cos(x) * std::exp(-x * x / 2.0);
    }
    const ArrayXd drho = g.deriv(f * base.rho, 0);  // mass neutral
    for (int j = 0; j < J; ++j) {
      const double t = j * h;
      const double sj = std::sin(M_PI * j / (J - 1.0));
      FieldState st = base;
      st.t = t;
      st.rho = base.rho + eps * sj * drho;
      st.phi_grid = ArrayXd::Constant(g.size(), -0.5 * t) + eps * sj * dphi;
      traj.push_back(st);
    }
    return traj;
  };
  const double a0 = action_value(trajectory(0.0), s, std::nullopt);
  const double eps = 1e-3;
  const double first_var =
      (action_value(trajectory(eps), s, std::nullopt) -
       action_value(trajectory(-eps), s, std::nullopt)) /
      (2.0 * eps);
  CHECK(std::abs(a0) == doctest::Approx(0.5 * T).epsilon(1e-6));
  CHECK(std::abs(first_var) < 1e-6 * std::abs(a0));
}

TEST_CASE("2d free Gaussian: symmetric spread and conserved norm") {
  Scenario s = free_scenario();
  s.n_particles = 2;  // two 1d particles sharing the grid
  s.masses = VectorXd::Ones(2);
  s.charges = VectorXd::Ones(2);
  // sigma = 2.5 keeps the corner density inside the gate band (no steep
  // lift crossing) at this resolution; dt = 1e-3 < 0.06 dx^2.
  s.grid = Grid::make2d(128, 128, {-10.0, -10.0}, {10.0, 10.0});
  s.initial.sigma = 2.5;
  s.initial.center = VectorXd::Zero(2);
  s.initial.momentum = VectorXd::Zero(2);
  FieldState st = initial_state(s);
  const ArrayXd x0 = st.grid.coord_field(0), x1 = st.grid.coord_field(1);
  const double v0_init = st.grid.integrate(st.rho * x0 * x0);
  for (int i = 0; i < 500; ++i)
    st = step_fields(st, s, std::nullopt, Integrator::Leapfrog, 1e-3);
  CHECK(st.grid.integrate(st.rho) == doctest::Approx(1.0).epsilon(1e-10));
  const double v0 = st.grid.integrate(st.rho * x0 * x0);
  const double v1 = st.grid.integrate(st.rho * x1 * x1);
  // Variance growth (hbar t / 2 m sigma0)^2 per axis; the domain truncation
  // of the initial Gaussian shifts the rate at the percent level, so the
  // quantitative spreading law is pinned by the finer 1d test above.
  CHECK(v0 - v0_init == doctest::Approx(0.5 * 0.5 / 25.0).epsilon(0.1));
  CHECK(v1 == doctest::Approx(v0).epsilon(1e-12));
}
