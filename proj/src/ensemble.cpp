#include "edyn/ensemble.hpp"

#include <cmath>
#include <vector>

namespace edyn {

namespace {
// Separate stream domain for initial sampling so propagation streams never
// collide with it.
constexpr std::uint64_t kInitDomain = 0x5eedf00d5eedf00dull;
}  // namespace

WalkerEnsemble sample_from_density(const Grid& grid, const ArrayXd& rho,
                                   Eigen::Index m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("sample_from_density: empty ensemble");
  const Eigen::Index G = grid.size();
  std::vector<double> cdf(G);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < G; ++i) {
    acc += std::max(rho[i], 0.0);
    cdf[i] = acc;
  }
  if (acc <= 0.0) throw std::invalid_argument("sample_from_density: zero mass");
  WalkerEnsemble e;
  e.seed = seed;
  e.positions.resize(m, grid.dim());
  for (Eigen::Index w = 0; w < m; ++w) {
    RandomStream rng(seed ^ kInitDomain, static_cast<std::uint64_t>(w), 0);
    const double u = rng.uniform() * acc;
    const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    const Eigen::Index cell = it - cdf.begin();
    const auto ij = grid.unflatten(cell);
    for (int a = 0; a < grid.dim(); ++a)
      e.positions(w, a) = grid.coord(a, ij[a]) + (rng.uniform() - 0.5) * grid.dx(a);
  }
  return e;
}

WalkerEnsemble delta_ensemble(const VectorXd& x0, Eigen::Index m,
                              std::uint64_t seed) {
  WalkerEnsemble e;
  e.seed = seed;
  e.positions = x0.transpose().replicate(m, 1);
  return e;
}

WalkerEnsemble propagate(const WalkerEnsemble& ensemble,
                         const DriftPotential& phi,
                         const std::optional<GaugeField>& gauge,
                         const Scenario& scenario, int n_steps,
                         const Grid& domain, PropagateStats* stats) {
  if (n_steps < 0) throw std::invalid_argument("propagate: n_steps < 0");
  WalkerEnsemble out = ensemble;
  std::int64_t clamped = 0;
  const Eigen::Index m = out.size();
  for (int s = 0; s < n_steps; ++s) {
    const double t = out.t;
    for (Eigen::Index w = 0; w < m; ++w) {
      VectorXd x = out.positions.row(w);
      const TransitionKernel k = build_kernel(x, phi, gauge, scenario, t);
      RandomStream rng(out.seed, static_cast<std::uint64_t>(w),
                       static_cast<std::uint64_t>(out.step_index));
      x += sample_step(k, rng);
      if (!domain.confine(x)) ++clamped;
      out.positions.row(w) = x;
    }
    ++out.step_index;
    out.t += scenario.dt;
  }
  if (stats) stats->clamped += clamped;
  return out;
}

DriftPotential drift_potential_from_fields(const FieldState& state,
                                           const Scenario& scenario) {
  const Grid g = state.grid;
  const auto valid = support_mask(state.rho);
  const ArrayXd s = state.rho.max(0.0).sqrt();
  ArrayXd base(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i)
    base[i] = valid[i] ? state.phi_grid[i] / scenario.eta + std::log(s[i]) : 0.0;
  fill_from_support(g, base, valid);
  // Gradient from the smooth fields directly: d(log sqrt(rho)) = rho'/(2 rho)
  // keeps spectral accuracy, which differentiating the plateau-filled log
  // field would not.
  std::vector<ArrayXd> grads(g.dim());
  for (int a = 0; a < g.dim(); ++a) {
    const ArrayXd dphi = g.deriv(state.phi_grid, a);
    const ArrayXd drho = g.deriv(state.rho, a);
    ArrayXd gax(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i)
      gax[i] = valid[i]
                   ? dphi[i] / scenario.eta + 0.5 * drho[i] / state.rho[i]
                   : 0.0;
    fill_from_support(g, gax, valid);
    grads[a] = gax;
  }
  VectorXd ramp = VectorXd::Zero(g.dim());
  for (int a = 0; a < g.dim(); ++a)
    if (state.ramp.size() > a) ramp[a] = state.ramp[a] / scenario.eta;
  DriftPotential p;
  p.value = [g, base, ramp](const VectorXd& x) {
    return interpolate(g, base, x) + ramp.dot(x);
  };
  p.gradient = [g, grads, ramp](const VectorXd& x) {
    VectorXd v(g.dim());
    for (int a = 0; a < g.dim(); ++a)
      v[a] = interpolate(g, grads[a], x) + ramp[a];
    return v;
  };
  return p;
}

ArrayXd estimate_density(const WalkerEnsemble& ensemble, const Grid& grid,
                         DensityMethod method, double bandwidth) {
  const Eigen::Index m = ensemble.size();
  if (m < 1) throw std::invalid_argument("estimate_density: empty ensemble");
  ArrayXd rho = ArrayXd::Zero(grid.size());
  if (method == DensityMethod::Histogram || bandwidth <= 0.0) {
    // Bins centered on grid nodes (nearest-node assignment) so the estimate
    // carries no half-cell shift against node-sampled reference densities.
    for (Eigen::Index w = 0; w < m; ++w) {
      std::array<int, 2> ij{0, 0};
      for (int a = 0; a < grid.dim(); ++a) {
        int i = static_cast<int>(
            std::lround((ensemble.positions(w, a) - grid.xmin(a)) / grid.dx(a)));
        if (grid.periodic()) {
          i %= grid.n(a);
          if (i < 0) i += grid.n(a);
        } else {
          i = std::clamp(i, 0, grid.n(a) - 1);
        }
        ij[a] = i;
      }
      rho[grid.flatten(ij[0], ij[1])] += 1.0;
    }
  } else {
    // Gaussian product kernel.
    const double h2 = bandwidth * bandwidth;
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      const VectorXd xg = grid.point(i);
      double acc = 0.0;
      for (Eigen::Index w = 0; w < m; ++w) {
        double e = 0.0;
        for (int a = 0; a < grid.dim(); ++a) {
          double d = ensemble.positions(w, a) - xg[a];
          if (grid.periodic()) {
            const double L = grid.length(a);
            d -= L * std::round(d / L);
          }
          e += d * d;
        }
        acc += std::exp(-e / (2.0 * h2));
      }
      rho[i] = acc;
    }
  }
  const double mass = grid.integrate(rho);
  if (mass <= 0.0)
    throw std::invalid_argument("estimate_density: all walkers out of domain");
  return rho / mass;
}

ArrowReport arrow_diagnostic(const Grid& grid, const ArrayXd& rho,
                             const DriftPotential& phi,
                             const Scenario& scenario, int n_probes) {
  ArrowReport rep;
  const int D = grid.dim();
  const double dV = grid.cell_volume();
  auto build = [&](const VectorXd& x) {
    return build_kernel(x, phi, scenario.gauge, scenario);
  };

  // Probe x' points spread over the supported region; cells below the
  // density floor are skipped (the reversed kernel is ill-conditioned there).
  const auto valid = support_mask(rho);
  std::vector<Eigen::Index> probes;
  const Eigen::Index stride = std::max<Eigen::Index>(1, grid.size() / n_probes);
  for (Eigen::Index i = 0; i < grid.size() && (int)probes.size() < n_probes;
       i += stride) {
    if (valid[i] && rho[i] > 0.0)
      probes.push_back(i);
    else
      ++rep.n_excluded;
  }

  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(D, D);
  std::vector<VectorXd> s(grid.size());
  for (Eigen::Index p : probes) {
    const VectorXd xp = grid.point(p);
    // Reversed kernel q on the grid, in coordinates relative to the probe;
    // periodic domains use minimum-image displacements so probes near the
    // seam see the wrapped kernel.
    ArrayXd q(grid.size());
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      const VectorXd xi = grid.point(i);
      VectorXd delta = xp - xi;
      if (grid.periodic()) {
        for (int a = 0; a < D; ++a) {
          const double L = grid.length(a);
          delta[a] -= L * std::round(delta[a] / L);
        }
      }
      s[i] = -delta;
      q[i] = rho[i] <= 0.0
                 ? 0.0
                 : rho[i] * std::exp(log_pdf(build(xi), xi + delta));
    }
    const double z = q.sum() * dV;
    if (z <= 0.0) continue;
    q /= z;

    VectorXd mean = VectorXd::Zero(D);
    for (Eigen::Index i = 0; i < grid.size(); ++i) mean += q[i] * dV * s[i];
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(D, D);
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      const VectorXd d = s[i] - mean;
      cov += q[i] * dV * d * d.transpose();
    }
    for (int a = 0; a < D; ++a) {
      double m4 = 0.0;
      for (Eigen::Index i = 0; i < grid.size(); ++i) {
        const double d = s[i][a] - mean[a];
        m4 += q[i] * dV * d * d * d * d;
      }
      const double s2 = cov(a, a);
      rep.excess_kurtosis_max =
          std::max(rep.excess_kurtosis_max, std::abs(m4 / (s2 * s2) - 3.0));
    }

    // KL(q || moment-matched Gaussian) by quadrature.
    const Eigen::LLT<Eigen::MatrixXd> llt(
        Eigen::MatrixXd(cov + 1e-300 * eye));
    const double logdet =
        2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    double kl = 0.0;
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      if (q[i] <= 0.0) continue;
      const VectorXd d = s[i] - mean;
      const double logg =
          -0.5 * (D * std::log(2.0 * M_PI) + logdet + d.dot(llt.solve(d)));
      kl += q[i] * (std::log(q[i]) - logg) * dV;
    }
    rep.kl_to_gaussian_max = std::max(rep.kl_to_gaussian_max, kl);
    ++rep.n_probes;
  }
  return rep;
}

}  // namespace edyn
