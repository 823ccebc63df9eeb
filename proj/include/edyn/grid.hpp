#pragma once

#include <Eigen/Dense>
#include <array>
#include <stdexcept>
#include <string>

namespace edyn {

using Eigen::ArrayXd;
using Eigen::ArrayXcd;
using Eigen::VectorXd;

enum class Boundary { Periodic, Reflecting };

// Uniform rectangular grid over the configuration space, dim in {1,2}.
// Axis extents are half-open [min, max); flattening is row-major
// (axis 0 slowest).
class Grid {
public:
  Grid() = default;
  Grid(int dim, std::array<int, 2> n, std::array<double, 2> xmin,
       std::array<double, 2> xmax, Boundary boundary = Boundary::Periodic);

  static Grid make1d(int n, double xmin, double xmax,
                     Boundary b = Boundary::Periodic);
  static Grid make2d(int n0, int n1, std::array<double, 2> xmin,
                     std::array<double, 2> xmax,
                     Boundary b = Boundary::Periodic);

  int dim() const { return dim_; }
  int n(int axis) const { return n_[axis]; }
  double xmin(int axis) const { return xmin_[axis]; }
  double xmax(int axis) const { return xmax_[axis]; }
  double dx(int axis) const { return dx_[axis]; }
  double length(int axis) const { return xmax_[axis] - xmin_[axis]; }
  Boundary boundary() const { return boundary_; }
  bool periodic() const { return boundary_ == Boundary::Periodic; }

  Eigen::Index size() const { return size_; }
  double cell_volume() const;

  Eigen::Index flatten(int i0, int i1 = 0) const;
  std::array<int, 2> unflatten(Eigen::Index idx) const;

  // Coordinate of grid node along one axis.
  double coord(int axis, int i) const { return xmin_[axis] + i * dx_[axis]; }
  ArrayXd axis_coords(int axis) const;
  // Full flattened coordinate field for one axis (broadcast over the grid).
  ArrayXd coord_field(int axis) const;
  VectorXd point(Eigen::Index idx) const;

  // Quadrature of a grid field. Rectangle rule on periodic grids (exact for
  // trigonometric polynomials), trapezoid on reflecting grids.
  double integrate(const ArrayXd& f) const;

  // First and second partial derivative along an axis: spectral on periodic
  // grids, 2nd-order centered stencils (one-sided at edges) otherwise.
  ArrayXd deriv(const ArrayXd& f, int axis) const;
  ArrayXd deriv2(const ArrayXd& f, int axis) const;
  void deriv_complex(const ArrayXcd& f, int axis, ArrayXcd& out) const;

  // Gaussian low-pass of the field, width in cells (spectral factor
  // exp(-(k w dx)^2 / 2) per axis). No-op on reflecting grids.
  ArrayXd smooth(const ArrayXd& f, double width_cells) const;

  // Spectral projection per axis: zeroes modes above 0.85 cut k_max, the
  // top of the spectrum that spectral Madelung stepping cannot resolve.
  // Idempotent by design. No-op on reflecting grids.
  ArrayXd dealias(const ArrayXd& f, double cut = 1.0) const;

  // Smooth high-order spectral damping exp(-strength (k/k_max)^16) per
  // axis. Unlike dealias this is graded, so callers must scale `strength`
  // with the time step to keep the damped dynamics step-size consistent.
  // No-op on reflecting grids.
  ArrayXd damp(const ArrayXd& f, double strength) const;

  // Wrap/reflect a raw point into the domain, in place. Returns false if the
  // point had to be clamped beyond the reflecting cutoff.
  bool confine(VectorXd& x) const;

  bool same_shape(const Grid& other) const;

private:
  ArrayXd spectral_apply(const ArrayXd& f, int axis, int order) const;
  ArrayXd fd_deriv(const ArrayXd& f, int axis, int order) const;
  void line_indices(int axis, int fixed, std::vector<Eigen::Index>& idx) const;

  int dim_ = 1;
  std::array<int, 2> n_{{0, 1}};
  std::array<double, 2> xmin_{{0.0, 0.0}};
  std::array<double, 2> xmax_{{1.0, 1.0}};
  std::array<double, 2> dx_{{0.0, 0.0}};
  Boundary boundary_ = Boundary::Periodic;
  Eigen::Index size_ = 0;
};

// Linear interpolation of a grid field at an arbitrary point (periodic wrap
// or clamped, per the grid's boundary).
double interpolate(const Grid& g, const ArrayXd& f, const VectorXd& x);

}  // namespace edyn
