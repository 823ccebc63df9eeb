#include "edyn/grid.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <vector>

namespace edyn {

Grid::Grid(int dim, std::array<int, 2> n, std::array<double, 2> xmin,
           std::array<double, 2> xmax, Boundary boundary)
    : dim_(dim), n_(n), xmin_(xmin), xmax_(xmax), boundary_(boundary) {
  if (dim < 1 || dim > 2) throw std::invalid_argument("Grid: dim must be 1 or 2");
  size_ = 1;
  for (int a = 0; a < dim_; ++a) {
    if (n_[a] < 16) throw std::invalid_argument("Grid: need >= 16 cells per axis");
    if (!(xmax_[a] > xmin_[a])) throw std::invalid_argument("Grid: empty extent");
    dx_[a] = (xmax_[a] - xmin_[a]) / n_[a];
    size_ *= n_[a];
  }
  if (dim_ == 1) n_[1] = 1;
}

Grid Grid::make1d(int n, double xmin, double xmax, Boundary b) {
  return Grid(1, {n, 1}, {xmin, 0.0}, {xmax, 1.0}, b);
}

Grid Grid::make2d(int n0, int n1, std::array<double, 2> xmin,
                  std::array<double, 2> xmax, Boundary b) {
  return Grid(2, {n0, n1}, xmin, xmax, b);
}

double Grid::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim_; ++a) v *= dx_[a];
  return v;
}

Eigen::Index Grid::flatten(int i0, int i1) const {
  return static_cast<Eigen::Index>(i0) * n_[1] + i1;
}

std::array<int, 2> Grid::unflatten(Eigen::Index idx) const {
  return {static_cast<int>(idx / n_[1]), static_cast<int>(idx % n_[1])};
}

ArrayXd Grid::axis_coords(int axis) const {
  ArrayXd c(n_[axis]);
  for (int i = 0; i < n_[axis]; ++i) c[i] = coord(axis, i);
  return c;
}

ArrayXd Grid::coord_field(int axis) const {
  ArrayXd out(size_);
  for (Eigen::Index idx = 0; idx < size_; ++idx) {
    auto ij = unflatten(idx);
    out[idx] = coord(axis, ij[axis]);
  }
  return out;
}

VectorXd Grid::point(Eigen::Index idx) const {
  auto ij = unflatten(idx);
  VectorXd x(dim_);
  for (int a = 0; a < dim_; ++a) x[a] = coord(a, ij[a]);
  return x;
}

double Grid::integrate(const ArrayXd& f) const {
  if (f.size() != size_) throw std::invalid_argument("integrate: size mismatch");
  if (periodic()) return f.sum() * cell_volume();
  // Trapezoid weights: 1/2 on each boundary face.
  double acc = 0.0;
  for (Eigen::Index idx = 0; idx < size_; ++idx) {
    auto ij = unflatten(idx);
    double w = 1.0;
    for (int a = 0; a < dim_; ++a)
      if (ij[a] == 0 || ij[a] == n_[a] - 1) w *= 0.5;
    acc += w * f[idx];
  }
  return acc * cell_volume();
}

void Grid::line_indices(int axis, int fixed,
                        std::vector<Eigen::Index>& idx) const {
  const int len = n_[axis];
  idx.resize(len);
  for (int i = 0; i < len; ++i)
    idx[i] = (axis == 0) ? flatten(i, fixed) : flatten(fixed, i);
}

ArrayXd Grid::spectral_apply(const ArrayXd& f, int axis, int order) const {
  const int len = n_[axis];
  const double L = length(axis);
  const int nlines = static_cast<int>(size_) / len;
  ArrayXd out(size_);
  static thread_local Eigen::FFT<double> fft;  // caches plans per length
  std::vector<Eigen::Index> idx;
  std::vector<std::complex<double>> line(len), freq(len);
  for (int l = 0; l < nlines; ++l) {
    line_indices(axis, l, idx);
    for (int i = 0; i < len; ++i) line[i] = f[idx[i]];
    fft.fwd(freq, line);
    for (int j = 0; j < len; ++j) {
      const int jj = (j <= len / 2) ? j : j - len;
      const double k = 2.0 * M_PI * jj / L;
      if (order == 1) {
        // Nyquist mode has no well-defined odd derivative.
        freq[j] *= (j == len / 2) ? 0.0 : std::complex<double>(0.0, k);
      } else {
        freq[j] *= -k * k;
      }
    }
    fft.inv(line, freq);
    for (int i = 0; i < len; ++i) out[idx[i]] = line[i].real();
  }
  return out;
}

ArrayXd Grid::smooth(const ArrayXd& f, double width_cells) const {
  if (f.size() != size_) throw std::invalid_argument("smooth: size mismatch");
  if (!periodic() || width_cells <= 0.0) return f;
  static thread_local Eigen::FFT<double> fft;
  ArrayXd out = f;
  std::vector<Eigen::Index> idx;
  for (int axis = 0; axis < dim_; ++axis) {
    const int len = n_[axis];
    const double L = length(axis);
    const double w = width_cells * dx_[axis];
    const int nlines = static_cast<int>(size_) / len;
    std::vector<std::complex<double>> line(len), freq(len);
    for (int l = 0; l < nlines; ++l) {
      line_indices(axis, l, idx);
      for (int i = 0; i < len; ++i) line[i] = out[idx[i]];
      fft.fwd(freq, line);
      for (int j = 0; j < len; ++j) {
        const int jj = (j <= len / 2) ? j : j - len;
        const double k = 2.0 * M_PI * jj / L;
        freq[j] *= std::exp(-0.5 * k * k * w * w);
      }
      fft.inv(line, freq);
      for (int i = 0; i < len; ++i) out[idx[i]] = line[i].real();
    }
  }
  return out;
}

ArrayXd Grid::dealias(const ArrayXd& f, double cut) const {
  if (f.size() != size_) throw std::invalid_argument("dealias: size mismatch");
  if (!periodic()) return f;
  static thread_local Eigen::FFT<double> fft;
  ArrayXd out = f;
  std::vector<Eigen::Index> idx;
  for (int axis = 0; axis < dim_; ++axis) {
    const int len = n_[axis];
    const int nlines = static_cast<int>(size_) / len;
    std::vector<std::complex<double>> line(len), freq(len);
    for (int l = 0; l < nlines; ++l) {
      line_indices(axis, l, idx);
      for (int i = 0; i < len; ++i) line[i] = out[idx[i]];
      fft.fwd(freq, line);
      for (int j = 0; j < len; ++j) {
        const int jj = (j <= len / 2) ? j : j - len;
        const double r = std::abs(jj) / (cut * len / 2.0);
        // Sharp cutoff so the filter is a projection: repeated application
        // (once per substep) must not keep eroding mid-band modes, or the
        // accumulated damping would scale with the step count and pollute
        // time-convergence studies. A smooth exponential factor did exactly
        // that.
        if (r > 0.85) freq[j] = 0.0;
      }
      fft.inv(line, freq);
      for (int i = 0; i < len; ++i) out[idx[i]] = line[i].real();
    }
  }
  return out;
}

ArrayXd Grid::damp(const ArrayXd& f, double strength) const {
  if (f.size() != size_) throw std::invalid_argument("damp: size mismatch");
  if (!periodic() || strength <= 0.0) return f;
  static thread_local Eigen::FFT<double> fft;
  ArrayXd out = f;
  std::vector<Eigen::Index> idx;
  for (int axis = 0; axis < dim_; ++axis) {
    const int len = n_[axis];
    const int nlines = static_cast<int>(size_) / len;
    std::vector<std::complex<double>> line(len), freq(len);
    for (int l = 0; l < nlines; ++l) {
      line_indices(axis, l, idx);
      for (int i = 0; i < len; ++i) line[i] = out[idx[i]];
      fft.fwd(freq, line);
      for (int j = 0; j < len; ++j) {
        const int jj = (j <= len / 2) ? j : j - len;
        const double r = std::abs(jj) / (len / 2.0);
        freq[j] *= std::exp(-strength * std::pow(r, 16));
      }
      fft.inv(line, freq);
      for (int i = 0; i < len; ++i) out[idx[i]] = line[i].real();
    }
  }
  return out;
}

ArrayXd Grid::fd_deriv(const ArrayXd& f, int axis, int order) const {
  const int len = n_[axis];
  const double h = dx_[axis];
  const int nlines = static_cast<int>(size_) / len;
  ArrayXd out(size_);
  std::vector<Eigen::Index> idx;
  for (int l = 0; l < nlines; ++l) {
    line_indices(axis, l, idx);
    auto g = [&](int i) { return f[idx[i]]; };
    for (int i = 0; i < len; ++i) {
      double v;
      if (order == 1) {
        if (i == 0)
          v = (-3 * g(0) + 4 * g(1) - g(2)) / (2 * h);
        else if (i == len - 1)
          v = (3 * g(len - 1) - 4 * g(len - 2) + g(len - 3)) / (2 * h);
        else
          v = (g(i + 1) - g(i - 1)) / (2 * h);
      } else {
        if (i == 0)
          v = (2 * g(0) - 5 * g(1) + 4 * g(2) - g(3)) / (h * h);
        else if (i == len - 1)
          v = (2 * g(len - 1) - 5 * g(len - 2) + 4 * g(len - 3) - g(len - 4)) /
              (h * h);
        else
          v = (g(i + 1) - 2 * g(i) + g(i - 1)) / (h * h);
      }
      out[idx[i]] = v;
    }
  }
  return out;
}

ArrayXd Grid::deriv(const ArrayXd& f, int axis) const {
  if (f.size() != size_) throw std::invalid_argument("deriv: size mismatch");
  return periodic() ? spectral_apply(f, axis, 1) : fd_deriv(f, axis, 1);
}

ArrayXd Grid::deriv2(const ArrayXd& f, int axis) const {
  if (f.size() != size_) throw std::invalid_argument("deriv2: size mismatch");
  return periodic() ? spectral_apply(f, axis, 2) : fd_deriv(f, axis, 2);
}

void Grid::deriv_complex(const ArrayXcd& f, int axis, ArrayXcd& out) const {
  ArrayXd re = deriv(f.real(), axis);
  ArrayXd im = deriv(f.imag(), axis);
  out.resize(size_);
  out.real() = re;
  out.imag() = im;
}

bool Grid::confine(VectorXd& x) const {
  bool ok = true;
  for (int a = 0; a < dim_; ++a) {
    const double L = length(a);
    if (periodic()) {
      double r = std::fmod(x[a] - xmin_[a], L);
      if (r < 0) r += L;
      x[a] = xmin_[a] + r;
    } else {
      // Specular reflection of the overshoot; repeated until inside.
      double v = x[a];
      for (int guard = 0; guard < 64; ++guard) {
        if (v < xmin_[a])
          v = 2 * xmin_[a] - v;
        else if (v > xmax_[a])
          v = 2 * xmax_[a] - v;
        else
          break;
      }
      if (v < xmin_[a] || v > xmax_[a]) {
        v = std::clamp(v, xmin_[a], xmax_[a]);
        ok = false;
      }
      x[a] = v;
    }
  }
  return ok;
}

bool Grid::same_shape(const Grid& other) const {
  if (dim_ != other.dim_) return false;
  for (int a = 0; a < dim_; ++a)
    if (n_[a] != other.n_[a] || xmin_[a] != other.xmin_[a] ||
        xmax_[a] != other.xmax_[a])
      return false;
  return true;
}

double interpolate(const Grid& g, const ArrayXd& f, const VectorXd& x) {
  // Multilinear interpolation with periodic wrap or edge clamp.
  std::array<int, 2> i0{0, 0};
  std::array<double, 2> w{0.0, 0.0};
  for (int a = 0; a < g.dim(); ++a) {
    double s = (x[a] - g.xmin(a)) / g.dx(a);
    int i = static_cast<int>(std::floor(s));
    w[a] = s - i;
    if (g.periodic()) {
      i %= g.n(a);
      if (i < 0) i += g.n(a);
    } else {
      i = std::clamp(i, 0, g.n(a) - 2);
      w[a] = std::clamp(s - i, 0.0, 1.0);
    }
    i0[a] = i;
  }
  auto wrap = [&](int a, int i) {
    return g.periodic() ? (i % g.n(a)) : std::min(i, g.n(a) - 1);
  };
  if (g.dim() == 1) {
    double f0 = f[g.flatten(i0[0])];
    double f1 = f[g.flatten(wrap(0, i0[0] + 1))];
    return (1 - w[0]) * f0 + w[0] * f1;
  }
  int j0 = i0[0], j1 = wrap(0, i0[0] + 1);
  int k0 = i0[1], k1 = wrap(1, i0[1] + 1);
  double f00 = f[g.flatten(j0, k0)], f01 = f[g.flatten(j0, k1)];
  double f10 = f[g.flatten(j1, k0)], f11 = f[g.flatten(j1, k1)];
  return (1 - w[0]) * ((1 - w[1]) * f00 + w[1] * f01) +
         w[0] * ((1 - w[1]) * f10 + w[1] * f11);
}

}  // namespace edyn
