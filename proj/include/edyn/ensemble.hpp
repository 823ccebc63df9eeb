#pragma once

#include "edyn/fields.hpp"
#include "edyn/kernel.hpp"

#include <cstdint>
#include <optional>

namespace edyn {

// M sample points in configuration space representing rho empirically.
struct WalkerEnsemble {
  Eigen::MatrixXd positions;  // M x D, row per walker
  std::int64_t step_index = 0;
  double t = 0.0;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return positions.rows(); }
};

// Deterministic draw of M walkers from a grid density (inverse-CDF over
// cells, uniform within a cell), keyed by the master seed.
WalkerEnsemble sample_from_density(const Grid& grid, const ArrayXd& rho,
                                   Eigen::Index m, std::uint64_t seed);

WalkerEnsemble delta_ensemble(const VectorXd& x0, Eigen::Index m,
                              std::uint64_t seed);

struct PropagateStats {
  std::int64_t clamped = 0;  // walkers pinned at a reflecting cutoff
};

// Advance every walker n_steps short steps; per-walker counter-based streams
// make the result independent of scheduling.
WalkerEnsemble propagate(const WalkerEnsemble& ensemble,
                         const DriftPotential& phi,
                         const std::optional<GaugeField>& gauge,
                         const Scenario& scenario, int n_steps,
                         const Grid& domain, PropagateStats* stats = nullptr);

// Drift potential phi = Phi/eta + log rho^{1/2}: the walker kernel built
// from it carries the state's density along the continuity equation.
DriftPotential drift_potential_from_fields(const FieldState& state,
                                           const Scenario& scenario);

enum class DensityMethod { Histogram, Kde };

// Normalized non-negative grid density estimate.
ArrayXd estimate_density(const WalkerEnsemble& ensemble, const Grid& grid,
                         DensityMethod method = DensityMethod::Histogram,
                         double bandwidth = 0.0);

struct ArrowReport {
  double kl_to_gaussian_max = 0.0;      // reversed kernel vs moment-matched
  double excess_kurtosis_max = 0.0;     // largest |excess kurtosis|
  int n_probes = 0;
  int n_excluded = 0;                   // zero-density cells skipped
};

// Bayes-reversal diagnostics: both quantities vanish iff rho is uniform on a
// periodic domain.
ArrowReport arrow_diagnostic(const Grid& grid, const ArrayXd& rho,
                             const DriftPotential& phi,
                             const Scenario& scenario, int n_probes = 8);

}  // namespace edyn
