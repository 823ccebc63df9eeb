#pragma once

#include "edyn/grid.hpp"
#include "edyn/rng.hpp"
#include "edyn/scenario.hpp"

#include <functional>
#include <optional>

namespace edyn {

// Drift potential phi(x) on configuration space (alpha' already absorbed).
struct DriftPotential {
  std::function<double(const VectorXd&)> value;
  std::function<VectorXd(const VectorXd&)> gradient;

  VectorXd grad(const VectorXd& x) const { return gradient(x); }

  static DriftPotential zero(int dim);
  static DriftPotential analytic(std::function<double(const VectorXd&)> v,
                                 std::function<VectorXd(const VectorXd&)> g);
  // Grid samples; gradient by 2nd-order centered differences (one-sided at
  // reflecting boundaries), values by multilinear interpolation.
  static DriftPotential sampled(const Grid& grid, const ArrayXd& values);
};

// Gaussian short-step transition law at one base point.
struct TransitionKernel {
  VectorXd base;      // x
  VectorXd mean;      // <dx^A> = b^A dt
  VectorXd variance;  // eta dt / m_n per coordinate
  double dt = 0.0;

  // Per-coordinate precision alpha = m_n / (eta dt).
  VectorXd alpha() const { return variance.cwiseInverse(); }
};

TransitionKernel build_kernel(const VectorXd& x, const DriftPotential& phi,
                              const std::optional<GaugeField>& gauge,
                              const Scenario& scenario, double t = 0.0);

// Exact Gaussian log-density, normalization included.
double log_pdf(const TransitionKernel& kernel, const VectorXd& x_next);

// One sampled displacement dx = mean + noise; deterministic per stream.
VectorXd sample_step(const TransitionKernel& kernel, RandomStream& rng);

// kappa_n = -2 d(log zeta)/d(alpha_n) = d/alpha_n + |<dx_n>|^2 per particle.
VectorXd kappa_from_alpha(const VectorXd& alpha_n,
                          const TransitionKernel& kernel, int spatial_dim);

using KernelBuilder = std::function<TransitionKernel(const VectorXd&)>;

// One Chapman-Kolmogorov step of a grid density by direct quadrature:
// rho'(x') = int dx P(x'|x) rho(x).
ArrayXd ck_evolve(const Grid& grid, const ArrayXd& rho,
                  const KernelBuilder& build);

// Bayes-reversed kernel log P(x|x') given rho(.,t) on a grid. rho at x' after
// one step is computed by quadrature; a zero there is an error, a zero at
// x_prev gives -inf.
double reverse_log_pdf(const VectorXd& x_prev, const VectorXd& x_next,
                       const KernelBuilder& build, const Grid& grid,
                       const ArrayXd& rho);

}  // namespace edyn
