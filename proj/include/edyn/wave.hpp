#pragma once

#include "edyn/fields.hpp"
#include "edyn/scenario.hpp"

#include <complex>
#include <optional>

namespace edyn {

struct NodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Regraduation bookkeeping: k_hat is the constant that removes the nonlinear
// term, and eta/k_hat is identified with hbar.
struct RegraduationConstants {
  double eta = 1.0;
  double xi = 0.125;

  double k_hat() const { return std::sqrt(eta * eta / (8.0 * xi)); }
  double hbar() const { return eta / k_hat(); }

  static RegraduationConstants from(const Scenario& s) {
    return {s.eta, s.xi};
  }
};

struct WaveState {
  Grid grid;
  ArrayXcd psi;
  double t = 0.0;
  double k = 0.0;  // regraduation constant used in the map

  double norm2(const Grid& g) const { return g.integrate(psi.abs2()); }
};

// Psi_k = rho^{1/2} exp(i k Phi / eta); k defaults to k_hat.
WaveState to_wave(const FieldState& state, const RegraduationConstants& c,
                  double k = 0.0);

// rho = |Psi|^2, Phi = (eta/k) * unwrapped phase. Nodes are an error: phase
// unwrapping is undefined there.
FieldState from_wave(const WaveState& wave, const RegraduationConstants& c);

enum class WaveMethod { SplitStep, CrankNicolson };

// One time step of the linear Schrodinger equation, optionally with the
// minimal-coupling gauge field. Norm is conserved to machine level.
WaveState step_schrodinger(const WaveState& wave, const Scenario& scenario,
                           const std::optional<GaugeField>& gauge, double dt,
                           WaveMethod method = WaveMethod::SplitStep);

// (eta^2/2k^2 - 4 xi) m^AB (d_A d_B |Psi_k|) / |Psi_k| * Psi_k.
// The coefficient is exactly zero at k = k_hat.
ArrayXcd nonlinear_residual(const WaveState& wave, double k,
                            const Scenario& scenario);

}  // namespace edyn
