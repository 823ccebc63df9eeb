#pragma once

#include "edyn/scenario.hpp"

#include <optional>
#include <vector>

namespace edyn {

struct SingularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Canonical pair (rho, Phi) on a configuration-space grid. The total phase is
// Phi(x) = phi_grid(x) + ramp . x; the linear ramp carries the non-periodic
// part so that spectral derivatives stay exact (plane waves, linear gauges).
struct FieldState {
  Grid grid;
  ArrayXd rho;
  ArrayXd phi_grid;
  VectorXd ramp;
  double t = 0.0;

  ArrayXd phi_total() const;
  ArrayXd grad_phi(int axis) const;  // d_A Phi including the ramp
  void check_finite(const char* where) const;
};

// Relative density floor; support_mask and the Fisher quadrature cut here.
inline constexpr double kRhoFloorRel = 1e-12;

// Density gate for the evolved Hamiltonian, relative to the mean density
// 1/volume (an exact invariant of the flow). The Madelung chart is singular
// where rho -> 0: the quantum term is 1/rho-stiff and the classical phase
// forms caustics, so an untreated tail amplifies round-off into a
// checkerboard blow-up. The cure here keeps the flow exactly Hamiltonian --
// so no regularization seam can pump energy -- by modifying the Hamiltonian
// itself: densities are lifted through the analytic map q(rho) >= kGateLo /
// volume before any division, and each term carries an erf weight w(q)
// ramping over log q across [kGateLo, kGateHi] * (1/volume). The equations
// of motion are the exact functional derivatives of the gated functional.
// Above kGateHi the dynamics match the ideal equations to the gate tails
// (~1e-10); far below, the fields are near-frozen and smooth. The erf is
// entire in log q, so its grid samples alias at Gaussian-small levels (an
// exactly-vanishing C-infinity step was tried first; its Gevrey spectral
// tail aliased into a smooth O(1e-3) bias across the whole support). The
// window spans six decades so the crossover on a Gaussian tail is wide in
// x (roughly ln(hi/lo) sigma^2 / x_gate) and stays spectrally resolved.
inline constexpr double kGateLo = 1e-10;
inline constexpr double kGateHi = 1e-4;
inline constexpr double kGateSlope = 3.5;  // erf argument scale in the window

// Per-step relaxation of the gated tail (see step_fields). Cell-scale
// blends at full gate weight damp the kinks that otherwise steepen into
// caustics at the gate front. A second, deliberately weak phase relaxation
// pulls the tail toward the nearest live value: the partially gated
// potential shears the tail phase across the whole crossover band, and
// once the shear passes a threshold the gated kinetic rectifier takes over
// and the growth turns exponential. The anchored target is shear-free by
// construction; the weak rate keeps its footprint (via the gate factor)
// negligible in the live region. The density blend must stay at kink
// scale: the log-density has a corner at the lift floor that a wide
// smoother would smear across the band every step.
inline constexpr double kPhaseSmoothCells = 1.5;
inline constexpr double kDensitySmoothCells = 1.5;
inline constexpr double kShearSmoothCells = 12.0;
inline constexpr double kShearRelaxRate = 0.05;

// Per-step smooth spectral damping exp(-rate * dt * (k/k_max)^16) applied
// after the sharp dealias projection (see step_fields); the dt scaling keeps
// the damped dynamics consistent across step sizes.
inline constexpr double kSpectralDampRate = 5.4e5;

enum class Integrator { Leapfrog, RK4 };

// d_t rho = -d_A [ rho m^AB (d_B Phi - A_B) ]
ArrayXd continuity_rhs(const FieldState& state, const Scenario& scenario,
                       const std::optional<GaugeField>& gauge);

// d_t Phi = -(1/2) m^AB (d_A Phi - A_A)(d_B Phi - A_B) - V
//           + (hbar^2/2) m^AB (d_A d_B rho^{1/2}) / rho^{1/2}
// computed as the exact functional derivative of the gated discrete
// Hamiltonian (equal to the expression above wherever rho > kGateHi / vol).
ArrayXd hamilton_jacobi_rhs(const FieldState& state, const Scenario& scenario,
                            const std::optional<GaugeField>& gauge);

// One time step of the coupled pair. Throws SingularityError when the
// density core splits across a node.
FieldState step_fields(const FieldState& state, const Scenario& scenario,
                       const std::optional<GaugeField>& gauge,
                       Integrator integrator, double dt);

struct HamiltonianReport {
  double kinetic = 0.0;
  double potential = 0.0;
  double quantum = 0.0;
  double total = 0.0;
};

HamiltonianReport ensemble_hamiltonian(const FieldState& state,
                                       const Scenario& scenario,
                                       const std::optional<GaugeField>& gauge);

// I_AB = int (1/rho) d_A rho d_B rho dx, restricted to cells above the floor.
Eigen::MatrixXd fisher_information(const Grid& grid, const ArrayXd& rho);

// P~_a = int rho sum_n dPhi/dx_n^a, one entry per spatial axis.
VectorXd momentum_expectation(const FieldState& state,
                              const Scenario& scenario);

// Discrete action A[rho,Phi] = int dt ( int dx Phi rho_dot - H~ ) with
// midpoint quadrature in t. Needs at least 3 snapshots.
double action_value(const std::vector<FieldState>& trajectory,
                    const Scenario& scenario,
                    const std::optional<GaugeField>& gauge);

double poisson_bracket(const Grid& grid, const ArrayXd& df_drho,
                       const ArrayXd& df_dphi, const ArrayXd& dg_drho,
                       const ArrayXd& dg_dphi);

struct BalanceReport {
  double h_initial = 0.0;
  double h_final = 0.0;
  double work = 0.0;      // int (dH/dt)_explicit dt
  double residual = 0.0;  // |Delta H - work|
};

BalanceReport energy_balance(const std::vector<FieldState>& trajectory,
                             const Scenario& scenario,
                             const std::optional<GaugeField>& gauge);

// Drift, osmotic, and current velocities; v = b + u when A = 0.
struct VelocityFields {
  std::vector<ArrayXd> drift;    // b^A
  std::vector<ArrayXd> osmotic;  // u^A
  std::vector<ArrayXd> current;  // v^A
};

VelocityFields velocity_fields(const FieldState& state,
                               const Scenario& scenario,
                               const std::optional<GaugeField>& gauge);

// Functional derivatives of the ensemble Hamiltonian (per unit volume).
ArrayXd dH_dphi(const FieldState& state, const Scenario& scenario,
                const std::optional<GaugeField>& gauge);
ArrayXd dH_drho(const FieldState& state, const Scenario& scenario,
                const std::optional<GaugeField>& gauge);

// Initial (rho, Phi) from the scenario's initial-state spec.
FieldState initial_state(const Scenario& scenario);

// Mask of cells with rho >= kRhoFloorRel * max(rho).
Eigen::Array<bool, Eigen::Dynamic, 1> support_mask(const ArrayXd& rho);

// Number of connected components of the valid mask (edge connectivity,
// periodic wrap honored). More than one means a node splits the support.
int support_components(const Grid& grid,
                       const Eigen::Array<bool, Eigen::Dynamic, 1>& valid);

// Core of the density: cells with rho >= kRhoCoreRel * max(rho).
inline constexpr double kRhoCoreRel = 1e-6;

// Number of connected components of the core. Two or more means a node
// genuinely splits the support; only substantial lobes count, the gated
// tail does not.
int support_lobes(const Grid& grid, const ArrayXd& rho);

// Nearest-neighbor extrapolation of f from the valid region into the mask.
void fill_from_support(const Grid& grid, ArrayXd& f,
                       const Eigen::Array<bool, Eigen::Dynamic, 1>& valid);

}  // namespace edyn
