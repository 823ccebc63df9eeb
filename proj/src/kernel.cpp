#include "edyn/kernel.hpp"

#include <cmath>
#include <limits>

namespace edyn {

DriftPotential DriftPotential::zero(int dim) {
  DriftPotential p;
  p.value = [](const VectorXd&) { return 0.0; };
  p.gradient = [dim](const VectorXd&) { return VectorXd::Zero(dim); };
  return p;
}

DriftPotential DriftPotential::analytic(
    std::function<double(const VectorXd&)> v,
    std::function<VectorXd(const VectorXd&)> g) {
  DriftPotential p;
  p.value = std::move(v);
  p.gradient = std::move(g);
  return p;
}

DriftPotential DriftPotential::sampled(const Grid& grid, const ArrayXd& values) {
  DriftPotential p;
  // Precompute grid gradients once; interpolate per query.
  std::vector<ArrayXd> grads(grid.dim());
  for (int a = 0; a < grid.dim(); ++a) grads[a] = grid.deriv(values, a);
  p.value = [grid, values](const VectorXd& x) {
    return interpolate(grid, values, x);
  };
  p.gradient = [grid, grads](const VectorXd& x) {
    VectorXd g(grid.dim());
    for (int a = 0; a < grid.dim(); ++a) g[a] = interpolate(grid, grads[a], x);
    return g;
  };
  return p;
}

TransitionKernel build_kernel(const VectorXd& x, const DriftPotential& phi,
                              const std::optional<GaugeField>& gauge,
                              const Scenario& scenario, double t) {
  if (scenario.dt <= 0.0) throw std::invalid_argument("build_kernel: dt <= 0");
  const VectorXd m = scenario.mass_per_coord();
  const VectorXd grad = phi.grad(x);
  VectorXd a = VectorXd::Zero(x.size());
  if (gauge) a = gauge->at(x, t);
  TransitionKernel k;
  k.base = x;
  k.dt = scenario.dt;
  // b^A = m^{AB} (eta d_B phi - A_B)
  k.mean = (scenario.eta * grad - a).cwiseQuotient(m) * scenario.dt;
  k.variance = scenario.eta * scenario.dt * m.cwiseInverse();
  return k;
}

double log_pdf(const TransitionKernel& kernel, const VectorXd& x_next) {
  const VectorXd d = x_next - kernel.base - kernel.mean;
  double lp = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double v = kernel.variance[i];
    lp += -0.5 * std::log(2.0 * M_PI * v) - 0.5 * d[i] * d[i] / v;
  }
  return lp;
}

VectorXd sample_step(const TransitionKernel& kernel, RandomStream& rng) {
  VectorXd dx(kernel.mean.size());
  for (Eigen::Index i = 0; i < dx.size(); ++i)
    dx[i] = kernel.mean[i] + std::sqrt(kernel.variance[i]) * rng.normal();
  return dx;
}

VectorXd kappa_from_alpha(const VectorXd& alpha_n,
                          const TransitionKernel& kernel, int spatial_dim) {
  if ((alpha_n.array() <= 0.0).any())
    throw std::invalid_argument("kappa_from_alpha: alpha_n must be > 0");
  const Eigen::Index N = alpha_n.size();
  VectorXd kappa(N);
  for (Eigen::Index n = 0; n < N; ++n) {
    double mean2 = 0.0;
    for (int a = 0; a < spatial_dim; ++a) {
      const double mu = kernel.mean[n * spatial_dim + a];
      mean2 += mu * mu;
    }
    kappa[n] = spatial_dim / alpha_n[n] + mean2;
  }
  return kappa;
}

ArrayXd ck_evolve(const Grid& grid, const ArrayXd& rho,
                  const KernelBuilder& build) {
  const double dV = grid.cell_volume();
  const Eigen::Index G = grid.size();
  ArrayXd out = ArrayXd::Zero(G);
  // Accumulate rho(x) P(x'|x) over source points; kernels are near-compact
  // so the quadrature is exact to machine level on domains >> sigma.
  for (Eigen::Index i = 0; i < G; ++i) {
    if (rho[i] == 0.0) continue;
    const TransitionKernel k = build(grid.point(i));
    const double w = rho[i] * dV;
    for (Eigen::Index j = 0; j < G; ++j)
      out[j] += w * std::exp(log_pdf(k, grid.point(j)));
  }
  return out;
}

double reverse_log_pdf(const VectorXd& x_prev, const VectorXd& x_next,
                       const KernelBuilder& build, const Grid& grid,
                       const ArrayXd& rho) {
  const double dV = grid.cell_volume();
  double rho_next = 0.0;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (rho[i] == 0.0) continue;
    rho_next += rho[i] * std::exp(log_pdf(build(grid.point(i)), x_next)) * dV;
  }
  if (rho_next <= 0.0)
    throw std::domain_error("reverse_log_pdf: rho(x',t') vanishes at x_next");
  const double rho_prev = interpolate(grid, rho, x_prev);
  if (rho_prev <= 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(rho_prev) + log_pdf(build(x_prev), x_next) -
         std::log(rho_next);
}

}  // namespace edyn
