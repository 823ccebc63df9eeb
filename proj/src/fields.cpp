#include "edyn/fields.hpp"

#include <cmath>
#include <deque>
#include <vector>

namespace edyn {

namespace {

using BoolArray = Eigen::Array<bool, Eigen::Dynamic, 1>;

std::vector<Eigen::Index> neighbors(const Grid& g, Eigen::Index idx) {
  std::vector<Eigen::Index> out;
  auto ij = g.unflatten(idx);
  for (int a = 0; a < g.dim(); ++a) {
    for (int s : {-1, 1}) {
      int i = ij[a] + s;
      if (g.periodic()) {
        i = (i + g.n(a)) % g.n(a);
      } else if (i < 0 || i >= g.n(a)) {
        continue;
      }
      auto nb = ij;
      nb[a] = i;
      out.push_back(g.flatten(nb[0], nb[1]));
    }
  }
  return out;
}


std::vector<ArrayXd> gauge_on_grid(const Grid& g,
                                   const std::optional<GaugeField>& gauge,
                                   double t) {
  std::vector<ArrayXd> a(g.dim());
  for (int ax = 0; ax < g.dim(); ++ax) a[ax] = ArrayXd::Zero(g.size());
  if (!gauge) return a;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const VectorXd v = gauge->at(g.point(i), t);
    for (int ax = 0; ax < g.dim(); ++ax) a[ax][i] = v[ax];
  }
  return a;
}

std::vector<ArrayXd> gauge_dt_on_grid(const Grid& g,
                                      const std::optional<GaugeField>& gauge,
                                      double t) {
  std::vector<ArrayXd> a(g.dim());
  for (int ax = 0; ax < g.dim(); ++ax) a[ax] = ArrayXd::Zero(g.size());
  if (!gauge || !gauge->time_dependent) return a;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const VectorXd v = gauge->ddt(g.point(i), t);
    for (int ax = 0; ax < g.dim(); ++ax) a[ax][i] = v[ax];
  }
  return a;
}

ArrayXd potential_on_grid(const Grid& g, const Potential& V, double t) {
  ArrayXd out(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) out[i] = V(g.point(i), t);
  return out;
}

double mean_density(const Grid& g) {
  double vol = 1.0;
  for (int a = 0; a < g.dim(); ++a) vol *= g.length(a);
  return 1.0 / vol;
}

// Analytic lift q(rho) = (rho + sqrt(rho^2 + p^2))/2 + p/2 with pivot
// p = kGateLo / volume: q ~ rho in the support, saturates at ~p in the tail,
// and stays >= p/2 even for the small negative round-off excursions the
// frozen tail can carry. Every 1/rho in the Hamiltonian uses q, so nothing
// is ever divided by a vanishing density. qp = dq/drho.
void lift_density(double rho, double rref, double& q, double& qp) {
  const double p = kGateLo * rref;
  const double s = std::sqrt(rho * rho + p * p);
  q = 0.5 * (rho + s) + 0.5 * p;
  qp = 0.5 * (1.0 + rho / s);
}

// Erf step in log(q) across [kGateLo, kGateHi] * mean density. Returns w and
// q dw/dq. Because q >= ~kGateLo/volume, w bottoms out at a small constant
// in the far tail, where all gated terms are smooth and near-frozen.
void gate_weight(double q, double rref, double& w, double& rdw) {
  const double lnr = std::log(kGateHi / kGateLo);
  const double u = std::log(q / (kGateLo * rref)) / lnr;
  const double z = kGateSlope * (u - 0.5);
  w = 0.5 * std::erfc(-z);
  rdw = kGateSlope * std::exp(-z * z) / (std::sqrt(M_PI) * lnr);
}

}  // namespace

ArrayXd FieldState::phi_total() const {
  ArrayXd out = phi_grid;
  for (int a = 0; a < grid.dim(); ++a)
    if (ramp.size() > a && ramp[a] != 0.0) out += ramp[a] * grid.coord_field(a);
  return out;
}

ArrayXd FieldState::grad_phi(int axis) const {
  ArrayXd g = grid.deriv(phi_grid, axis);
  if (ramp.size() > axis && ramp[axis] != 0.0) g += ramp[axis];
  return g;
}

void FieldState::check_finite(const char* where) const {
  if (!rho.isFinite().all() || !phi_grid.isFinite().all())
    throw NumericalError(std::string(where) + ": non-finite field values");
}

BoolArray support_mask(const ArrayXd& rho) {
  const double floor = kRhoFloorRel * rho.maxCoeff();
  return rho >= floor;
}

int support_components(const Grid& grid, const BoolArray& valid) {
  std::vector<char> seen(valid.size(), 0);
  int comps = 0;
  for (Eigen::Index s = 0; s < valid.size(); ++s) {
    if (!valid[s] || seen[s]) continue;
    ++comps;
    std::deque<Eigen::Index> q{s};
    seen[s] = 1;
    while (!q.empty()) {
      Eigen::Index c = q.front();
      q.pop_front();
      for (Eigen::Index nb : neighbors(grid, c)) {
        if (valid[nb] && !seen[nb]) {
          seen[nb] = 1;
          q.push_back(nb);
        }
      }
    }
  }
  return comps;
}

int support_lobes(const Grid& grid, const ArrayXd& rho) {
  // Smooth before thresholding so single-cell jitter at the core boundary
  // cannot masquerade as a node, and count only lobes that reach 1% of the
  // peak: threshold-contour slivers pinched off by boundary jitter are not
  // nodes, while a genuine node splits the core into comparable lobes.
  const ArrayXd r = grid.smooth(rho, 2.0);
  const double rmax = r.maxCoeff();
  const BoolArray valid = r >= kRhoCoreRel * rmax;
  std::vector<char> seen(valid.size(), 0);
  int lobes = 0;
  for (Eigen::Index s = 0; s < valid.size(); ++s) {
    if (!valid[s] || seen[s]) continue;
    double peak = 0.0;
    std::deque<Eigen::Index> q{s};
    seen[s] = 1;
    while (!q.empty()) {
      Eigen::Index c = q.front();
      q.pop_front();
      peak = std::max(peak, r[c]);
      for (Eigen::Index nb : neighbors(grid, c)) {
        if (valid[nb] && !seen[nb]) {
          seen[nb] = 1;
          q.push_back(nb);
        }
      }
    }
    if (peak >= 0.01 * rmax) ++lobes;
  }
  return lobes;
}

// BFS from the valid region; masked cells copy their nearest known neighbor.
void fill_from_support(const Grid& grid, ArrayXd& f, const BoolArray& valid) {
  std::vector<char> known(valid.size());
  std::deque<Eigen::Index> q;
  for (Eigen::Index i = 0; i < valid.size(); ++i) {
    known[i] = valid[i];
    if (valid[i]) q.push_back(i);
  }
  while (!q.empty()) {
    const Eigen::Index c = q.front();
    q.pop_front();
    for (Eigen::Index nb : neighbors(grid, c)) {
      if (!known[nb]) {
        f[nb] = f[c];
        known[nb] = 1;
        q.push_back(nb);
      }
    }
  }
}

ArrayXd continuity_rhs(const FieldState& state, const Scenario& scenario,
                       const std::optional<GaugeField>& gauge) {
  const Grid& g = state.grid;
  const VectorXd minv = scenario.mass_per_coord().cwiseInverse();
  const auto a = gauge_on_grid(g, gauge, state.t);
  const double rref = mean_density(g);
  ArrayXd h(g.size());  // gated density w(q(rho)) rho
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    double q, qp, w, rdw;
    lift_density(state.rho[i], rref, q, qp);
    gate_weight(q, rref, w, rdw);
    h[i] = w * w * w * state.rho[i];
  }
  ArrayXd rhs = ArrayXd::Zero(g.size());
  for (int ax = 0; ax < g.dim(); ++ax) {
    const ArrayXd flux = h * minv[ax] * (state.grad_phi(ax) - a[ax]);
    rhs -= g.deriv(flux, ax);
  }
  return rhs;
}

ArrayXd hamilton_jacobi_rhs(const FieldState& state, const Scenario& scenario,
                            const std::optional<GaugeField>& gauge) {
  const Grid& g = state.grid;
  const VectorXd minv = scenario.mass_per_coord().cwiseInverse();
  const auto a = gauge_on_grid(g, gauge, state.t);
  ArrayXd kinetic = ArrayXd::Zero(g.size());
  for (int ax = 0; ax < g.dim(); ++ax) {
    const ArrayXd d = state.grad_phi(ax) - a[ax];
    kinetic += 0.5 * minv[ax] * d * d;
  }
  const ArrayXd v = potential_on_grid(g, scenario.potential, state.t);
  // Exact functional derivative of the gated Hamiltonian
  //   H = int [ w^3(q) rho K + w(q) rho V + xi m^AB w(q) (d_A q)(d_B q) / q ],
  // with the lifted density q(rho). The kinetic term carries the cube of the
  // gate: the Hamilton-Jacobi nonlinearity rectifies tail phase noise
  // downward (d_t Phi ~ -w (dPhi)^2 regardless of the noise sign), a
  // finite-time caustic even at the floor value of w; cubing the (entire)
  // weight pushes the floor to ~3e-7 without touching the live region. The
  // Fisher part reproduces the quantum potential
  //   Q = 2 xi m^AB [ d_A d_B rho / rho - (1/2) (d_A rho)(d_B rho)/rho^2 ]
  // wherever w = 1 and q ~ rho. Writing r_A = d_A q / q and G_A = 2 w r_A,
  //   d_t Phi = -(w^3 + 3 w^2 q w' q' rho/q) K - (w + q w' q' rho/q) V
  //             + xi m^AB q' [ (w - q w') r_A r_B + d_A G_B ].
  const double rref = mean_density(g);
  ArrayXd q(g.size()), qp(g.size()), w(g.size()), rdw(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    lift_density(state.rho[i], rref, q[i], qp[i]);
    gate_weight(q[i], rref, w[i], rdw[i]);
  }
  const ArrayXd wq = rdw * qp * state.rho / q;
  ArrayXd rhs = -(w * w * w + 3.0 * w * w * wq) * kinetic - (w + wq) * v;
  for (int ax = 0; ax < g.dim(); ++ax) {
    const ArrayXd dq = g.deriv(q, ax);
    const ArrayXd ratio = dq / q;
    const ArrayXd gat = 2.0 * w * ratio;
    rhs += scenario.xi * minv[ax] * qp *
           ((w - rdw) * ratio * ratio + g.deriv(gat, ax));
  }
  return rhs;
}

namespace {

// rho-weighted least-squares fit of f to c + l . x. A secular linear-in-x
// phase (plane-wave drift, driven or ramped fields) must accumulate in the
// ramp, not in the periodic phi_grid, where its seam jump would ring.
VectorXd weighted_slope(const Grid& g, const ArrayXd& rho, const ArrayXd& f) {
  const int D = g.dim();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(D + 1, D + 1);
  VectorXd b = VectorXd::Zero(D + 1);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double w = std::max(rho[i], 0.0);
    if (w == 0.0) continue;
    VectorXd u(D + 1);
    u[0] = 1.0;
    const VectorXd x = g.point(i);
    for (int a = 0; a < D; ++a) u[a + 1] = x[a];
    M += w * u * u.transpose();
    b += w * u * f[i];
  }
  const VectorXd sol = M.ldlt().solve(b);
  return sol.tail(D);
}

// Symmetric Strang step: half kick of Phi, full drift of rho, half kick.
// Substeps use implicit-midpoint fixed-point iterations in the advanced
// variable to keep the composition time-reversible. Each substep output is
// dealiased: the gate front is a marginally resolved feature, so an
// unfiltered substep rings the whole grid at the top of the spectrum, and
// in the deep tail that ringing can exceed the lift floor and flip the sign
// of rho (a catastrophic log-density oscillation for the next kick).
FieldState leapfrog_step(const FieldState& state, const Scenario& sc,
                         const std::optional<GaugeField>& gauge, double dt) {
  constexpr int kIters = 4;
  FieldState st = state;

  auto half_kick = [&](double t_eval) {
    FieldState mid = st;
    mid.t = t_eval;
    ArrayXd phi0 = st.phi_grid;
    ArrayXd phi1 = phi0;
    VectorXd ramp0 = st.ramp, ramp1 = ramp0;
    for (int it = 0; it < kIters; ++it) {
      mid.phi_grid = 0.5 * (phi0 + phi1);
      mid.ramp = 0.5 * (ramp0 + ramp1);
      ArrayXd rhs = hamilton_jacobi_rhs(mid, sc, gauge);
      const VectorXd ell = weighted_slope(mid.grid, mid.rho, rhs);
      for (int a = 0; a < mid.grid.dim(); ++a)
        rhs -= ell[a] * mid.grid.coord_field(a);
      phi1 = st.grid.dealias(phi0 + 0.5 * dt * rhs);
      ramp1 = ramp0 + 0.5 * dt * ell;
    }
    st.phi_grid = phi1;
    st.ramp = ramp1;
  };

  half_kick(state.t + 0.25 * dt);

  {
    FieldState mid = st;
    mid.t = state.t + 0.5 * dt;
    ArrayXd rho0 = st.rho;
    ArrayXd rho1 = rho0;
    for (int it = 0; it < kIters; ++it) {
      mid.rho = 0.5 * (rho0 + rho1);
      rho1 = st.grid.dealias(rho0 + dt * continuity_rhs(mid, sc, gauge));
    }
    st.rho = rho1;
  }

  half_kick(state.t + 0.75 * dt);
  st.t = state.t + dt;
  return st;
}

FieldState rk4_step(const FieldState& state, const Scenario& sc,
                    const std::optional<GaugeField>& gauge, double dt) {
  // Stage derivatives are dealiased for the same reason as the leapfrog
  // substeps: unfiltered stage states ring the deep tail above the lift floor.
  auto rhs = [&](const FieldState& s, ArrayXd& dr, ArrayXd& dp, VectorXd& dl) {
    dr = s.grid.dealias(continuity_rhs(s, sc, gauge));
    dp = hamilton_jacobi_rhs(s, sc, gauge);
    dl = weighted_slope(s.grid, s.rho, dp);
    for (int a = 0; a < s.grid.dim(); ++a)
      dp -= dl[a] * s.grid.coord_field(a);
    dp = s.grid.dealias(dp);
  };
  ArrayXd k1r, k1p, k2r, k2p, k3r, k3p, k4r, k4p;
  VectorXd k1l, k2l, k3l, k4l;
  rhs(state, k1r, k1p, k1l);
  FieldState s2 = state;
  s2.rho = state.rho + 0.5 * dt * k1r;
  s2.phi_grid = state.phi_grid + 0.5 * dt * k1p;
  s2.ramp = state.ramp + 0.5 * dt * k1l;
  s2.t = state.t + 0.5 * dt;
  rhs(s2, k2r, k2p, k2l);
  FieldState s3 = state;
  s3.rho = state.rho + 0.5 * dt * k2r;
  s3.phi_grid = state.phi_grid + 0.5 * dt * k2p;
  s3.ramp = state.ramp + 0.5 * dt * k2l;
  s3.t = state.t + 0.5 * dt;
  rhs(s3, k3r, k3p, k3l);
  FieldState s4 = state;
  s4.rho = state.rho + dt * k3r;
  s4.phi_grid = state.phi_grid + dt * k3p;
  s4.ramp = state.ramp + dt * k3l;
  s4.t = state.t + dt;
  rhs(s4, k4r, k4p, k4l);
  FieldState out = state;
  out.rho = state.rho + dt / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r);
  out.phi_grid = state.phi_grid + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
  out.ramp = state.ramp + dt / 6.0 * (k1l + 2 * k2l + 2 * k3l + k4l);
  out.t = state.t + dt;
  return out;
}

}  // namespace

FieldState step_fields(const FieldState& state, const Scenario& scenario,
                       const std::optional<GaugeField>& gauge,
                       Integrator integrator, double dt) {
  // A split support means the Madelung chart has already broken down; fail
  // before the spectral derivatives turn the gap into non-finite values.
  if (support_lobes(state.grid, state.rho) > 1)
    throw SingularityError("density core is split (node detected)");
  FieldState out = (integrator == Integrator::Leapfrog)
                       ? leapfrog_step(state, scenario, gauge, dt)
                       : rk4_step(state, scenario, gauge, dt);
  // The top of the spectrum is unresolvable for the quantum term (its free
  // dispersion puts omega dt near the stability margin); shed it every step.
  // Below the projection cutoff the gate front still pumps the upper band,
  // so a smooth graded damping follows. Its exponent scales with dt: the
  // damped dynamics then converge to a single step-size-independent limit,
  // which a fixed per-application filter factor would destroy.
  out.rho = out.grid.dealias(out.rho);
  out.phi_grid = out.grid.dealias(out.phi_grid);
  // Relax the phase in the gated tail. With the Fisher term frozen there,
  // the live phase (pumped by quantum pressure) outruns the tail and the
  // kink at the gate front steepens under the kinetic nonlinearity like an
  // inviscid Burgers flow -- a finite-time caustic no gate weight can stop.
  // Blending toward a smoothed phase, weighted by (1 - w), acts as an
  // unconditionally stable implicit viscosity confined to densities below
  // the gate window; where w = 1 the phase is untouched.
  // The density gets the same treatment in log space: smoothing is exact on
  // linear functions, so the exponential tail profile passes through
  // unchanged while cell-scale multiplicative noise is damped. The lift is
  // invertible (with Y = q - p/2, rho = Y - p^2/4Y), and the correction is
  // recentred within the band so the total mass is exactly conserved.
  if (out.grid.periodic()) {
    const double rref = mean_density(out.grid);
    const double p = kGateLo * rref;
    const Eigen::Index n = out.grid.size();
    ArrayXd gate(n), logq(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double q, qp, w, rdw;
      lift_density(out.rho[i], rref, q, qp);
      gate_weight(q, rref, w, rdw);
      gate[i] = 1.0 - w;
      logq[i] = std::log(q);
    }
    // Quartic-exact smoother 2L - L.L: no bias on quadratic profiles
    // (Gaussian log-densities, spreading phases), strong damping at high k.
    auto lowpass = [&](const ArrayXd& f, double cells) {
      const ArrayXd a = out.grid.smooth(f, cells);
      return (2.0 * a - out.grid.smooth(a, cells)).eval();
    };
    const ArrayXd sphi = lowpass(out.phi_grid, kPhaseSmoothCells);
    out.phi_grid += gate * (sphi - out.phi_grid);
    // Shear relaxation: target is the nearest live phase value (smoothed to
    // round off the fill's plateaus), anchored at the gate fronts.
    Eigen::Array<bool, Eigen::Dynamic, 1> live(n);
    for (Eigen::Index i = 0; i < n; ++i)
      live[i] = out.rho[i] >= kGateHi * rref;
    if (live.any() && !live.all()) {
      ArrayXd target = out.phi_grid;
      fill_from_support(out.grid, target, live);
      target = lowpass(target, kShearSmoothCells);
      out.phi_grid += kShearRelaxRate * gate * (target - out.phi_grid);
    }
    const ArrayXd slogq = lowpass(logq, kDensitySmoothCells);
    logq += gate * (slogq - logq);
    ArrayXd rho_new(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double y = std::exp(logq[i]) - 0.5 * p;
      rho_new[i] = y - 0.25 * p * p / y;
    }
    // Mass recentring weighted by gate * rho: the correction concentrates at
    // the top of the band instead of raining on the far tail, whose large
    // potential energy would otherwise pick up a secular drift.
    const ArrayXd drho = rho_new - out.rho;
    const ArrayXd wgt = gate * rho_new.max(0.0);
    if (wgt.sum() > 0.0)
      out.rho = rho_new - (drho.sum() / wgt.sum()) * wgt;
  }
  out.check_finite("step_fields");
  // Node guard on the completed step only: transient sub-states inside the
  // integrator carry unfiltered noise that is not a physical node.
  if (support_lobes(out.grid, out.rho) > 1)
    throw SingularityError("density core is split (node detected)");
  return out;
}

HamiltonianReport ensemble_hamiltonian(const FieldState& state,
                                       const Scenario& scenario,
                                       const std::optional<GaugeField>& gauge) {
  const Grid& g = state.grid;
  const VectorXd minv = scenario.mass_per_coord().cwiseInverse();
  const auto a = gauge_on_grid(g, gauge, state.t);
  ArrayXd kin = ArrayXd::Zero(g.size());
  for (int ax = 0; ax < g.dim(); ++ax) {
    const ArrayXd d = state.grad_phi(ax) - a[ax];
    kin += 0.5 * minv[ax] * state.rho * d * d;
  }
  HamiltonianReport r;
  r.kinetic = g.integrate(kin);
  r.potential =
      g.integrate(state.rho * potential_on_grid(g, scenario.potential, state.t));
  const Eigen::MatrixXd I = fisher_information(g, state.rho);
  double qi = 0.0;
  for (int ax = 0; ax < g.dim(); ++ax) qi += minv[ax] * I(ax, ax);
  r.quantum = scenario.xi * qi;
  r.total = r.kinetic + r.potential + r.quantum;
  return r;
}

Eigen::MatrixXd fisher_information(const Grid& grid, const ArrayXd& rho) {
  const int D = grid.dim();
  const BoolArray valid = support_mask(rho);
  std::vector<ArrayXd> dr(D);
  for (int ax = 0; ax < D; ++ax) dr[ax] = grid.deriv(rho, ax);
  Eigen::MatrixXd I(D, D);
  for (int ax = 0; ax < D; ++ax) {
    for (int bx = ax; bx < D; ++bx) {
      ArrayXd f = ArrayXd::Zero(grid.size());
      for (Eigen::Index i = 0; i < grid.size(); ++i)
        if (valid[i]) f[i] = dr[ax][i] * dr[bx][i] / rho[i];
      I(ax, bx) = I(bx, ax) = grid.integrate(f);
    }
  }
  return I;
}

VectorXd momentum_expectation(const FieldState& state,
                              const Scenario& scenario) {
  VectorXd p = VectorXd::Zero(scenario.spatial_dim);
  for (int A = 0; A < state.grid.dim(); ++A) {
    const int a = A % scenario.spatial_dim;
    p[a] += state.grid.integrate(state.rho * state.grad_phi(A));
  }
  return p;
}

double action_value(const std::vector<FieldState>& trajectory,
                    const Scenario& scenario,
                    const std::optional<GaugeField>& gauge) {
  if (trajectory.size() < 3)
    throw std::invalid_argument("action_value: need at least 3 snapshots");
  double action = 0.0;
  for (std::size_t j = 0; j + 1 < trajectory.size(); ++j) {
    const FieldState& s0 = trajectory[j];
    const FieldState& s1 = trajectory[j + 1];
    const double ht = s1.t - s0.t;
    if (ht <= 0.0)
      throw std::invalid_argument("action_value: non-increasing times");
    FieldState mid = s0;
    mid.rho = 0.5 * (s0.rho + s1.rho);
    mid.phi_grid = 0.5 * (s0.phi_grid + s1.phi_grid);
    mid.ramp = 0.5 * (s0.ramp + s1.ramp);
    mid.t = 0.5 * (s0.t + s1.t);
    const ArrayXd rho_dot = (s1.rho - s0.rho) / ht;
    const double pdot = mid.grid.integrate(mid.phi_total() * rho_dot);
    const double h = ensemble_hamiltonian(mid, scenario, gauge).total;
    action += ht * (pdot - h);
  }
  return action;
}

double poisson_bracket(const Grid& grid, const ArrayXd& df_drho,
                       const ArrayXd& df_dphi, const ArrayXd& dg_drho,
                       const ArrayXd& dg_dphi) {
  if (df_drho.size() != grid.size() || df_dphi.size() != grid.size() ||
      dg_drho.size() != grid.size() || dg_dphi.size() != grid.size())
    throw std::invalid_argument("poisson_bracket: grid mismatch");
  return grid.integrate(df_drho * dg_dphi - df_dphi * dg_drho);
}

BalanceReport energy_balance(const std::vector<FieldState>& trajectory,
                             const Scenario& scenario,
                             const std::optional<GaugeField>& gauge) {
  if (trajectory.size() < 2)
    throw std::invalid_argument("energy_balance: need at least 2 snapshots");
  auto explicit_dHdt = [&](const FieldState& st) {
    const Grid& g = st.grid;
    ArrayXd dv(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i)
      dv[i] = scenario.potential.ddt(g.point(i), st.t);
    double w = g.integrate(st.rho * dv);
    if (gauge && gauge->time_dependent) {
      const VectorXd minv = scenario.mass_per_coord().cwiseInverse();
      const auto a = gauge_on_grid(g, gauge, st.t);
      const auto adot = gauge_dt_on_grid(g, gauge, st.t);
      for (int ax = 0; ax < g.dim(); ++ax) {
        const ArrayXd d = st.grad_phi(ax) - a[ax];
        w -= g.integrate(st.rho * minv[ax] * d * adot[ax]);
      }
    }
    return w;
  };
  BalanceReport r;
  r.h_initial = ensemble_hamiltonian(trajectory.front(), scenario, gauge).total;
  r.h_final = ensemble_hamiltonian(trajectory.back(), scenario, gauge).total;
  double work = 0.0;
  double prev = explicit_dHdt(trajectory.front());
  for (std::size_t j = 1; j < trajectory.size(); ++j) {
    const double cur = explicit_dHdt(trajectory[j]);
    work += 0.5 * (prev + cur) * (trajectory[j].t - trajectory[j - 1].t);
    prev = cur;
  }
  r.work = work;
  r.residual = std::abs((r.h_final - r.h_initial) - r.work);
  return r;
}

VelocityFields velocity_fields(const FieldState& state,
                               const Scenario& scenario,
                               const std::optional<GaugeField>& gauge) {
  const Grid& g = state.grid;
  const VectorXd minv = scenario.mass_per_coord().cwiseInverse();
  const auto a = gauge_on_grid(g, gauge, state.t);
  const BoolArray valid = support_mask(state.rho);
  const ArrayXd s = state.rho.max(0.0).sqrt();
  VelocityFields vf;
  vf.drift.resize(g.dim());
  vf.osmotic.resize(g.dim());
  vf.current.resize(g.dim());
  for (int ax = 0; ax < g.dim(); ++ax) {
    const ArrayXd ds = g.deriv(s, ax);
    ArrayXd dlogs(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i)
      dlogs[i] = valid[i] ? ds[i] / s[i] : 0.0;
    fill_from_support(g, dlogs, valid);
    vf.current[ax] = minv[ax] * (state.grad_phi(ax) - a[ax]);
    vf.osmotic[ax] = -scenario.eta * minv[ax] * dlogs;
    vf.drift[ax] = vf.current[ax] - vf.osmotic[ax];
  }
  return vf;
}

ArrayXd dH_dphi(const FieldState& state, const Scenario& scenario,
                const std::optional<GaugeField>& gauge) {
  return continuity_rhs(state, scenario, gauge);
}

ArrayXd dH_drho(const FieldState& state, const Scenario& scenario,
                const std::optional<GaugeField>& gauge) {
  return -hamilton_jacobi_rhs(state, scenario, gauge);
}

FieldState initial_state(const Scenario& scenario) {
  const Grid& g = scenario.grid;
  if (g.size() == 0)
    throw ConfigError("initial_state: scenario has no grid");
  FieldState st;
  st.grid = g;
  st.ramp = VectorXd::Zero(g.dim());
  st.phi_grid = ArrayXd::Zero(g.size());
  st.t = 0.0;
  const InitialSpec& in = scenario.initial;
  if (in.type == "uniform") {
    st.rho = ArrayXd::Constant(g.size(), 1.0);
  } else {
    VectorXd sigma2(g.dim());
    if (in.type == "gaussian") {
      sigma2.setConstant(in.sigma * in.sigma);
    } else if (in.type == "ground" || in.type == "coherent") {
      const VectorXd m = scenario.mass_per_coord();
      for (int a = 0; a < g.dim(); ++a)
        sigma2[a] = scenario.hbar() / (2.0 * m[a] * in.omega);
    } else {
      throw ConfigError("unknown initial state type '" + in.type + "'");
    }
    st.rho.resize(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const VectorXd x = g.point(i);
      double e = 0.0;
      for (int a = 0; a < g.dim(); ++a) {
        const double d = x[a] - in.center[a];
        e += d * d / (2.0 * sigma2[a]);
      }
      st.rho[i] = std::exp(-e);
    }
  }
  st.rho /= g.integrate(st.rho);
  // Plane-wave phase goes into the ramp so spectral derivatives stay exact.
  for (int a = 0; a < g.dim(); ++a)
    if (in.momentum.size() > a) st.ramp[a] = in.momentum[a];
  return st;
}

}  // namespace edyn
