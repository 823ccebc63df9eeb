#include "edyn/wave.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <cstdio>
#include <deque>
#include <sstream>
#include <vector>

namespace edyn {

namespace {

using cd = std::complex<double>;
using BoolArray = Eigen::Array<bool, Eigen::Dynamic, 1>;

double wrap_pi(double a) {
  while (a > M_PI) a -= 2.0 * M_PI;
  while (a < -M_PI) a += 2.0 * M_PI;
  return a;
}

std::vector<Eigen::Index> cell_neighbors(const Grid& g, Eigen::Index idx) {
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

std::string point_string(const Grid& g, Eigen::Index idx) {
  const VectorXd x = g.point(idx);
  std::ostringstream os;
  os << "(";
  for (int a = 0; a < g.dim(); ++a) os << (a ? ", " : "") << x[a];
  os << ")";
  return os.str();
}

}  // namespace

WaveState to_wave(const FieldState& state, const RegraduationConstants& c,
                  double k) {
  if (k <= 0.0) k = c.k_hat();
  WaveState w;
  w.grid = state.grid;
  w.t = state.t;
  w.k = k;
  const ArrayXd phase = (k / c.eta) * state.phi_total();
  const ArrayXd amp = state.rho.max(0.0).sqrt();
  w.psi.resize(state.grid.size());
  for (Eigen::Index i = 0; i < w.psi.size(); ++i)
    w.psi[i] = amp[i] * cd(std::cos(phase[i]), std::sin(phase[i]));
  return w;
}

FieldState from_wave(const WaveState& wave, const RegraduationConstants& c) {
  const Grid& g = wave.grid;
  const double k = wave.k > 0.0 ? wave.k : c.k_hat();
  FieldState st;
  st.grid = g;
  st.t = wave.t;
  st.ramp = VectorXd::Zero(g.dim());
  st.rho = wave.psi.abs2();

  const BoolArray valid = support_mask(st.rho);
  if (support_lobes(g, st.rho) > 1) {
    // Name the offending node: the masked cell squeezed between valid ones.
    Eigen::Index worst = 0;
    int best = -1;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      if (valid[i]) continue;
      int cnt = 0;
      for (Eigen::Index nb : cell_neighbors(g, i)) cnt += valid[nb];
      if (cnt > best) {
        best = cnt;
        worst = i;
      }
    }
    throw NodeError("from_wave: node at " + point_string(g, worst) +
                    "; phase unwrapping undefined");
  }

  // Unwrap the phase over the support along a BFS spanning tree rooted at
  // the leftmost support point.
  ArrayXd theta = ArrayXd::Zero(g.size());
  Eigen::Index root = -1;
  for (Eigen::Index i = 0; i < g.size() && root < 0; ++i)
    if (valid[i]) root = i;
  if (root < 0) throw NodeError("from_wave: empty support");
  std::vector<char> seen(g.size(), 0);
  std::deque<Eigen::Index> q{root};
  seen[root] = 1;
  theta[root] = std::arg(wave.psi[root]);
  while (!q.empty()) {
    const Eigen::Index cidx = q.front();
    q.pop_front();
    for (Eigen::Index nb : cell_neighbors(g, cidx)) {
      if (!valid[nb] || seen[nb]) continue;
      theta[nb] = theta[cidx] +
                  wrap_pi(std::arg(wave.psi[nb]) - std::arg(wave.psi[cidx]));
      seen[nb] = 1;
      q.push_back(nb);
    }
  }
  if (g.dim() == 2) {
    // Closed-plaquette consistency: any mismatch flags a multi-valued phase.
    for (int i = 0; i + 1 < g.n(0); ++i) {
      for (int j = 0; j + 1 < g.n(1); ++j) {
        const Eigen::Index p00 = g.flatten(i, j), p10 = g.flatten(i + 1, j);
        const Eigen::Index p11 = g.flatten(i + 1, j + 1),
                           p01 = g.flatten(i, j + 1);
        if (!(valid[p00] && valid[p10] && valid[p11] && valid[p01])) continue;
        auto d = [&](Eigen::Index a, Eigen::Index b) {
          return wrap_pi(std::arg(wave.psi[b]) - std::arg(wave.psi[a]));
        };
        const double loop = d(p00, p10) + d(p10, p11) + d(p11, p01) + d(p01, p00);
        if (std::abs(loop) > 1e-6)
          throw NodeError("from_wave: multi-valued phase at plaquette " +
                          point_string(g, p00));
      }
    }
  }
  fill_from_support(g, theta, valid);
  st.phi_grid = (c.eta / k) * theta;
  return st;
}

namespace {

void potential_phase(WaveState& w, const Scenario& sc, double t_eval,
                     double dt_half, double hbar) {
  const Grid& g = w.grid;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double v = sc.potential(g.point(i), t_eval);
    const double ph = -v * dt_half / hbar;
    w.psi[i] *= cd(std::cos(ph), std::sin(ph));
  }
}

// Kinetic substep along one axis, exact for the A frozen at t_eval. The
// zero-mean part of A along the line has a periodic primitive Lambda with
// Lambda' = A - Abar; conjugating by exp(-i Lambda / hbar) reduces the axis
// factor exp(-i dt (p - A)^2 / 2 m hbar) to the uniform-A case, which is
// diagonal in the line's Fourier basis.
void kinetic_axis(WaveState& w, const Scenario& sc,
                  const std::optional<GaugeField>& gauge, int axis, double dt,
                  double t_eval, double hbar) {
  const Grid& g = w.grid;
  const double m = sc.mass_per_coord()[axis];
  const int len = g.n(axis);
  const double L = g.length(axis);
  const int nlines = static_cast<int>(g.size()) / len;
  static thread_local Eigen::FFT<double> fft;
  std::vector<cd> line(len), freq(len);
  std::vector<Eigen::Index> idx(len);
  std::vector<double> aline(len), lam(len);
  for (int l = 0; l < nlines; ++l) {
    for (int i = 0; i < len; ++i)
      idx[i] = (axis == 0) ? g.flatten(i, l) : g.flatten(l, i);
    double abar = 0.0;
    bool varying = false;
    if (gauge) {
      for (int i = 0; i < len; ++i)
        aline[i] = gauge->at(g.point(idx[i]), t_eval)[axis];
      for (int i = 0; i < len; ++i) abar += aline[i];
      abar /= len;
      for (int i = 0; i < len; ++i)
        if (aline[i] != abar) varying = true;
      if (varying) {
        // Spectral antiderivative of the zero-mean part.
        for (int i = 0; i < len; ++i) line[i] = cd(aline[i] - abar, 0.0);
        fft.fwd(freq, line);
        for (int j = 0; j < len; ++j) {
          const int jj = (j <= len / 2) ? j : j - len;
          if (jj == 0 || j == len / 2) {
            freq[j] = cd(0.0, 0.0);
          } else {
            const double kk = 2.0 * M_PI * jj / L;
            freq[j] /= cd(0.0, kk);
          }
        }
        fft.inv(line, freq);
        for (int i = 0; i < len; ++i) lam[i] = line[i].real();
      }
    }
    for (int i = 0; i < len; ++i) line[i] = w.psi[idx[i]];
    if (varying) {
      for (int i = 0; i < len; ++i) {
        const double ph = -lam[i] / hbar;
        line[i] *= cd(std::cos(ph), std::sin(ph));
      }
    }
    fft.fwd(freq, line);
    for (int j = 0; j < len; ++j) {
      const int jj = (j <= len / 2) ? j : j - len;
      const double kk = 2.0 * M_PI * jj / L;
      const double p = hbar * kk - abar;
      const double ph = -dt * p * p / (2.0 * m * hbar);
      freq[j] *= cd(std::cos(ph), std::sin(ph));
    }
    fft.inv(line, freq);
    if (varying) {
      for (int i = 0; i < len; ++i) {
        const double ph = lam[i] / hbar;
        line[i] *= cd(std::cos(ph), std::sin(ph));
      }
    }
    for (int i = 0; i < len; ++i) w.psi[idx[i]] = line[i];
  }
}

WaveState split_step(const WaveState& wave, const Scenario& sc,
                     const std::optional<GaugeField>& gauge, double dt,
                     double hbar) {
  WaveState w = wave;
  potential_phase(w, sc, wave.t + 0.25 * dt, 0.5 * dt, hbar);
  const double t_mid = wave.t + 0.5 * dt;
  for (int ax = 0; ax < w.grid.dim(); ++ax)
    kinetic_axis(w, sc, gauge, ax, dt, t_mid, hbar);
  potential_phase(w, sc, wave.t + 0.75 * dt, 0.5 * dt, hbar);
  w.t = wave.t + dt;
  return w;
}

// Crank-Nicolson with a 3-point Laplacian; cyclic or plain tridiagonal solve.
WaveState crank_nicolson(const WaveState& wave, const Scenario& sc,
                         const std::optional<GaugeField>& gauge, double dt,
                         double hbar) {
  if (wave.grid.dim() != 1)
    throw std::invalid_argument("Crank-Nicolson stepper is 1D only");
  if (gauge)
    throw std::invalid_argument(
        "Crank-Nicolson stepper does not support a vector potential; use the "
        "split-step method");
  const Grid& g = wave.grid;
  const int n = g.n(0);
  const double dx = g.dx(0);
  const double m = sc.mass_per_coord()[0];
  const double t_mid = wave.t + 0.5 * dt;
  const cd itheta(0.0, dt / (2.0 * hbar));

  // Accuracy guard: highest resolved energy times dt should stay modest.
  const double kmax = M_PI / dx;
  const double emax = hbar * hbar * kmax * kmax / (2.0 * m);
  if (dt * emax / hbar > M_PI)
    std::fprintf(stderr,
                 "[edyn] warning: Crank-Nicolson step poorly resolves the "
                 "grid's fastest mode; suggest dt <= %.3e\n",
                 M_PI * hbar / emax);

  const double off = -hbar * hbar / (2.0 * m * dx * dx);
  Eigen::VectorXcd diag(n), rhs(n);
  for (int i = 0; i < n; ++i) {
    const double v = sc.potential(g.point(i), t_mid);
    diag[i] = hbar * hbar / (m * dx * dx) + v;
  }
  // rhs = (I - i theta H) psi
  auto apply_H = [&](const Eigen::VectorXcd& p, int i) {
    cd acc = diag[i] * p[i];
    if (i > 0)
      acc += off * p[i - 1];
    else if (g.periodic())
      acc += off * p[n - 1];
    if (i < n - 1)
      acc += off * p[i + 1];
    else if (g.periodic())
      acc += off * p[0];
    return acc;
  };
  Eigen::VectorXcd psi = wave.psi.matrix();
  for (int i = 0; i < n; ++i) rhs[i] = psi[i] - itheta * apply_H(psi, i);

  // Solve (I + i theta H) x = rhs.
  Eigen::VectorXcd a = Eigen::VectorXcd::Constant(n, itheta * off);  // sub
  Eigen::VectorXcd b(n), cvec = a;                                   // diag, sup
  for (int i = 0; i < n; ++i) b[i] = 1.0 + itheta * diag[i];

  auto thomas = [&](Eigen::VectorXcd bb, Eigen::VectorXcd dd) {
    for (int i = 1; i < n; ++i) {
      const cd w = a[i] / bb[i - 1];
      bb[i] -= w * cvec[i - 1];
      dd[i] -= w * dd[i - 1];
    }
    Eigen::VectorXcd x(n);
    x[n - 1] = dd[n - 1] / bb[n - 1];
    for (int i = n - 2; i >= 0; --i)
      x[i] = (dd[i] - cvec[i] * x[i + 1]) / bb[i];
    return x;
  };

  Eigen::VectorXcd x;
  if (!g.periodic()) {
    x = thomas(b, rhs);
  } else {
    // Sherman-Morrison for the cyclic corner terms.
    const cd corner = itheta * off;
    const cd gamma = -b[0];
    Eigen::VectorXcd bmod = b;
    bmod[0] -= gamma;
    bmod[n - 1] -= corner * corner / gamma;
    Eigen::VectorXcd u = Eigen::VectorXcd::Zero(n);
    u[0] = gamma;
    u[n - 1] = corner;
    const Eigen::VectorXcd y = thomas(bmod, rhs);
    const Eigen::VectorXcd z = thomas(bmod, u);
    const cd frac = (y[0] + corner * y[n - 1] / gamma) /
                    (1.0 + z[0] + corner * z[n - 1] / gamma);
    x = y - frac * z;
  }

  WaveState out = wave;
  out.psi = x.array();
  out.t = wave.t + dt;
  return out;
}

}  // namespace

WaveState step_schrodinger(const WaveState& wave, const Scenario& scenario,
                           const std::optional<GaugeField>& gauge, double dt,
                           WaveMethod method) {
  const double hbar = scenario.hbar();
  if (hbar <= 0.0)
    throw std::invalid_argument("step_schrodinger: xi must be > 0");
  WaveState out = (method == WaveMethod::SplitStep)
                      ? split_step(wave, scenario, gauge, dt, hbar)
                      : crank_nicolson(wave, scenario, gauge, dt, hbar);
  if (!out.psi.isFinite().all())
    throw NumericalError("step_schrodinger: non-finite wave values");
  return out;
}

ArrayXcd nonlinear_residual(const WaveState& wave, double k,
                            const Scenario& scenario) {
  RegraduationConstants c{scenario.eta, scenario.xi};
  // The regraduation identity makes the coefficient vanish identically at
  // k = k_hat; avoid spurious roundoff there.
  const double coeff = (k == c.k_hat())
                           ? 0.0
                           : c.eta * c.eta / (2.0 * k * k) - 4.0 * scenario.xi;
  const Grid& g = wave.grid;
  const ArrayXd amp = wave.psi.abs();
  const ArrayXd rho = wave.psi.abs2();
  const BoolArray valid = support_mask(rho);
  const VectorXd minv = scenario.mass_per_coord().cwiseInverse();
  ArrayXd lap = ArrayXd::Zero(g.size());
  for (int ax = 0; ax < g.dim(); ++ax) lap += minv[ax] * g.deriv2(amp, ax);
  ArrayXcd out = ArrayXcd::Zero(g.size());
  if (coeff == 0.0) return out;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    if (valid[i]) out[i] = coeff * lap[i] / amp[i] * wave.psi[i];
  return out;
}

}  // namespace edyn
