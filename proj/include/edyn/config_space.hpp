#pragma once

#include "edyn/scenario.hpp"

namespace edyn {

// Diagonal mass tensor m_AB = m_n delta_AB and its inverse (the diffusion
// tensor), indexed by the configuration coordinate A = (n,a).
struct MassTensor {
  VectorXd diag;          // m_AB
  VectorXd inverse_diag;  // m^AB
  double total_mass = 0.0;
};

MassTensor build_mass_tensors(const Scenario& scenario);

// Information metric gamma_AB = C m_n / (eta dt) delta_AB (diagonal entries).
VectorXd info_metric(const Scenario& scenario, double C);

// Per-particle constraint bookkeeping; dynamics is parameterized by the
// multipliers, kappa values are recoverable via kappa_from_alpha.
struct ConstraintSpec {
  VectorXd kappa_n;
  double kappa_prime = 0.0;
  VectorXd kappa_doubleprime_n;
};

}  // namespace edyn
