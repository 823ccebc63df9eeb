#include "edyn/gauge.hpp"

#include <cmath>

namespace edyn {

double GaugeFunction::chi(const VectorXd& xn) const {
  double v = constant;
  if (linear.size() > 0) v += linear.dot(xn);
  if (periodic_part) v += periodic_part(xn);
  return v;
}

VectorXd GaugeFunction::grad_chi(const VectorXd& xn) const {
  VectorXd g = VectorXd::Zero(xn.size());
  if (linear.size() > 0) g += linear;
  if (periodic_grad) g += periodic_grad(xn);
  return g;
}

double GaugeFunction::bar(const VectorXd& x, const Scenario& s) const {
  double v = 0.0;
  for (int n = 0; n < s.n_particles; ++n)
    v += chi(x.segment(n * s.spatial_dim, s.spatial_dim));
  return v;
}

VectorXd GaugeFunction::grad_bar(const VectorXd& x, const Scenario& s) const {
  VectorXd g(x.size());
  for (int n = 0; n < s.n_particles; ++n)
    g.segment(n * s.spatial_dim, s.spatial_dim) =
        grad_chi(x.segment(n * s.spatial_dim, s.spatial_dim));
  return g;
}

GaugeFunction GaugeFunction::constant_fn(double c, int spatial_dim) {
  GaugeFunction f;
  f.constant = c;
  f.linear = VectorXd::Zero(spatial_dim);
  return f;
}

GaugeFunction GaugeFunction::linear_fn(const VectorXd& lam) {
  GaugeFunction f;
  f.linear = lam;
  return f;
}

GaugeFunction GaugeFunction::sinusoidal(double amp, int n_wave,
                                        const Grid& grid, int spatial_dim) {
  GaugeFunction f;
  f.linear = VectorXd::Zero(spatial_dim);
  std::vector<double> x0(spatial_dim), kw(spatial_dim);
  for (int a = 0; a < spatial_dim; ++a) {
    x0[a] = grid.xmin(a);
    kw[a] = 2.0 * M_PI * n_wave / grid.length(a);
  }
  f.periodic_part = [amp, x0, kw](const VectorXd& xn) {
    double v = 0.0;
    for (Eigen::Index a = 0; a < xn.size(); ++a)
      v += amp * std::sin(kw[a] * (xn[a] - x0[a]));
    return v;
  };
  f.periodic_grad = [amp, x0, kw](const VectorXd& xn) {
    VectorXd g(xn.size());
    for (Eigen::Index a = 0; a < xn.size(); ++a)
      g[a] = amp * kw[a] * std::cos(kw[a] * (xn[a] - x0[a]));
    return g;
  };
  return f;
}

GaugeFunction GaugeFunction::sampled(const Grid& grid, const ArrayXd& values) {
  GaugeFunction f;
  f.linear = VectorXd::Zero(grid.dim());
  std::vector<ArrayXd> grads(grid.dim());
  for (int a = 0; a < grid.dim(); ++a) grads[a] = grid.deriv(values, a);
  f.periodic_part = [grid, values](const VectorXd& xn) {
    return interpolate(grid, values, xn);
  };
  f.periodic_grad = [grid, grads](const VectorXd& xn) {
    VectorXd g(grid.dim());
    for (int a = 0; a < grid.dim(); ++a) g[a] = interpolate(grid, grads[a], xn);
    return g;
  };
  return f;
}

DriftPotential transform_drift(const DriftPotential& phi,
                               const GaugeFunction& chi, const Scenario& s) {
  DriftPotential out;
  const double inv_eta = 1.0 / s.eta;
  out.value = [phi, chi, s, inv_eta](const VectorXd& x) {
    return phi.value(x) + inv_eta * chi.bar(x, s);
  };
  out.gradient = [phi, chi, s, inv_eta](const VectorXd& x) {
    return VectorXd(phi.gradient(x) + inv_eta * chi.grad_bar(x, s));
  };
  return out;
}

FieldState transform_fields(const FieldState& state, const GaugeFunction& chi,
                            const Scenario& s) {
  FieldState out = state;
  if (out.ramp.size() == 0) out.ramp = VectorXd::Zero(state.grid.dim());
  // Linear part into the ramp, the rest pointwise.
  for (int A = 0; A < state.grid.dim(); ++A) {
    const int a = A % s.spatial_dim;
    if (chi.linear.size() > a) out.ramp[A] += chi.linear[a];
  }
  for (Eigen::Index i = 0; i < state.grid.size(); ++i) {
    const VectorXd x = state.grid.point(i);
    double v = chi.constant * s.n_particles;
    if (chi.periodic_part)
      for (int n = 0; n < s.n_particles; ++n)
        v += chi.periodic_part(x.segment(n * s.spatial_dim, s.spatial_dim));
    out.phi_grid[i] += v;
  }
  return out;
}

GaugeField transform_gauge(const std::optional<GaugeField>& gauge,
                           const GaugeFunction& chi, const Scenario& s) {
  GaugeField out;
  out.name = (gauge ? gauge->name : std::string("none")) + "+dchi";
  out.time_dependent = gauge && gauge->time_dependent;
  const std::optional<GaugeField> base = gauge;
  out.lift = [base, chi, s](const VectorXd& x, double t) {
    VectorXd a = chi.grad_bar(x, s);
    if (base) a += base->at(x, t);
    return a;
  };
  if (base && base->lift_dt)
    out.lift_dt = [base](const VectorXd& x, double t) {
      return base->ddt(x, t);
    };
  return out;
}

WaveState transform_wave(const WaveState& wave, const GaugeFunction& chi,
                         const Scenario& s) {
  WaveState out = wave;
  const double hbar = s.hbar();
  for (Eigen::Index i = 0; i < wave.grid.size(); ++i) {
    const double ph = chi.bar(wave.grid.point(i), s) / hbar;
    out.psi[i] *= std::complex<double>(std::cos(ph), std::sin(ph));
  }
  return out;
}

InvarianceReport invariance_report(const Scenario& scenario,
                                   const GaugeFunction& chi,
                                   const std::string& pipeline, int n_steps) {
  InvarianceReport r;
  r.pipeline = pipeline;
  const double dt = scenario.field_dt();

  if (pipeline == "kernel") {
    // Drift potential phi derived from the initial state.
    const FieldState st = initial_state(scenario);
    DriftPotential phi = DriftPotential::sampled(st.grid, st.phi_total());
    DriftPotential phi2 = transform_drift(phi, chi, scenario);
    const GaugeField g2 = transform_gauge(scenario.gauge, chi, scenario);
    for (Eigen::Index i = 0; i < st.grid.size(); i += 7) {
      const VectorXd x = st.grid.point(i);
      const TransitionKernel k1 =
          build_kernel(x, phi, scenario.gauge, scenario);
      const TransitionKernel k2 = build_kernel(x, phi2, g2, scenario);
      r.kernel_mean_dev = std::max(
          r.kernel_mean_dev, (k1.mean - k2.mean).cwiseAbs().maxCoeff());
      r.kernel_cov_dev =
          std::max(r.kernel_cov_dev,
                   (k1.variance - k2.variance).cwiseAbs().maxCoeff());
    }
    r.max_deviation = std::max(r.kernel_mean_dev, r.kernel_cov_dev);
    return r;
  }

  if (pipeline == "fields") {
    FieldState a = initial_state(scenario);
    FieldState b = transform_fields(a, chi, scenario);
    const GaugeField g2 = transform_gauge(scenario.gauge, chi, scenario);
    const std::optional<GaugeField> g2opt = g2;
    for (int s = 0; s < n_steps; ++s) {
      a = step_fields(a, scenario, scenario.gauge, Integrator::Leapfrog, dt);
      b = step_fields(b, scenario, g2opt, Integrator::Leapfrog, dt);
      r.rho_dev = std::max(r.rho_dev, (a.rho - b.rho).abs().maxCoeff());
    }
    r.hamiltonian_dev =
        std::abs(ensemble_hamiltonian(a, scenario, scenario.gauge).total -
                 ensemble_hamiltonian(b, scenario, g2opt).total);
    r.changed = (transform_fields(a, chi, scenario).phi_grid - a.phi_grid)
                    .abs()
                    .maxCoeff();
    r.max_deviation = std::max(r.rho_dev, r.hamiltonian_dev);
    return r;
  }

  if (pipeline == "wave") {
    const RegraduationConstants c = RegraduationConstants::from(scenario);
    const FieldState st0 = initial_state(scenario);
    WaveState a = to_wave(st0, c);
    WaveState b = transform_wave(a, chi, scenario);
    const GaugeField g2 = transform_gauge(scenario.gauge, chi, scenario);
    const std::optional<GaugeField> g2opt = g2;
    for (int s = 0; s < n_steps; ++s) {
      a = step_schrodinger(a, scenario, scenario.gauge, dt);
      b = step_schrodinger(b, scenario, g2opt, dt);
      r.rho_dev =
          std::max(r.rho_dev, (a.psi.abs2() - b.psi.abs2()).abs().maxCoeff());
    }
    r.max_deviation = r.rho_dev;
    return r;
  }

  throw std::invalid_argument("invariance_report: unknown pipeline '" +
                              pipeline + "'");
}

}  // namespace edyn
