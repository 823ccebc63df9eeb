#pragma once

#include "edyn/fields.hpp"
#include "edyn/kernel.hpp"
#include "edyn/scenario.hpp"
#include "edyn/wave.hpp"

#include <optional>
#include <string>

namespace edyn {

// Per-particle gauge function chi(x_n) = c + lam . x_n + p(x_n), with the
// linear coefficient kept separate so periodic grids can carry it exactly
// (phase ramp / constant A shift).
struct GaugeFunction {
  double constant = 0.0;
  VectorXd linear;  // per spatial axis
  std::function<double(const VectorXd&)> periodic_part;
  std::function<VectorXd(const VectorXd&)> periodic_grad;

  double chi(const VectorXd& xn) const;
  VectorXd grad_chi(const VectorXd& xn) const;

  // Lifted chi_bar(x) = sum_n chi(x_n) and its configuration-space gradient.
  double bar(const VectorXd& x, const Scenario& s) const;
  VectorXd grad_bar(const VectorXd& x, const Scenario& s) const;

  static GaugeFunction constant_fn(double c, int spatial_dim);
  static GaugeFunction linear_fn(const VectorXd& lam);
  // amp * sin(2 pi n_wave (x - xmin)/L + phase) per axis, periodic on the
  // scenario grid by construction.
  static GaugeFunction sinusoidal(double amp, int n_wave, const Grid& grid,
                                  int spatial_dim);
  static GaugeFunction sampled(const Grid& grid, const ArrayXd& values);
};

// phi -> phi + chi_bar/eta (drift potential form).
DriftPotential transform_drift(const DriftPotential& phi,
                               const GaugeFunction& chi, const Scenario& s);

// Phi -> Phi + chi_bar; the linear part goes into the state's ramp.
FieldState transform_fields(const FieldState& state, const GaugeFunction& chi,
                            const Scenario& s);

// A_A -> A_A + d_A chi_bar.
GaugeField transform_gauge(const std::optional<GaugeField>& gauge,
                           const GaugeFunction& chi, const Scenario& s);

// Psi -> exp(i chi_bar / hbar) Psi.
WaveState transform_wave(const WaveState& wave, const GaugeFunction& chi,
                         const Scenario& s);

struct InvarianceReport {
  std::string pipeline;
  double max_deviation = 0.0;      // gauge-invariant observable drift
  double kernel_mean_dev = 0.0;
  double kernel_cov_dev = 0.0;
  double rho_dev = 0.0;
  double hamiltonian_dev = 0.0;
  double changed = 0.0;  // how much the non-invariant fields moved (sanity)
};

// Runs the chosen pipeline with and without the transform and reports the
// largest deviation of gauge-invariant observables.
InvarianceReport invariance_report(const Scenario& scenario,
                                   const GaugeFunction& chi,
                                   const std::string& pipeline,
                                   int n_steps = 100);

}  // namespace edyn
