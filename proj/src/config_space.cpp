#include "edyn/config_space.hpp"

namespace edyn {

MassTensor build_mass_tensors(const Scenario& scenario) {
  MassTensor t;
  t.diag = scenario.mass_per_coord();
  t.inverse_diag = t.diag.cwiseInverse();
  t.total_mass = scenario.masses.sum();
  return t;
}

VectorXd info_metric(const Scenario& scenario, double C) {
  if (C <= 0.0) throw std::invalid_argument("info_metric: C must be > 0");
  return VectorXd(C / (scenario.eta * scenario.dt) *
                  scenario.mass_per_coord());
}

}  // namespace edyn
