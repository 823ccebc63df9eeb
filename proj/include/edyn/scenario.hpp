#pragma once

#include "edyn/grid.hpp"

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

namespace edyn {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scalar potential V(x,t) on configuration space. dt_value is the explicit
// time derivative, used by energy-balance checks.
struct Potential {
  std::function<double(const VectorXd&, double)> value;
  std::function<double(const VectorXd&, double)> dt_value;
  bool time_dependent = false;
  std::string name = "free";

  double operator()(const VectorXd& x, double t = 0.0) const {
    return value ? value(x, t) : 0.0;
  }
  double ddt(const VectorXd& x, double t) const {
    return dt_value ? dt_value(x, t) : 0.0;
  }

  static Potential free();
  static Potential harmonic(double omega, const VectorXd& mass_per_coord);
  static Potential barrier(double height, double width, double center = 0.0);
  // V(x,t) = E * x0 * sin(Omega t) summed over coordinates.
  static Potential driven(double E, double Omega);
};

// External vector potential, stored in lifted configuration-space form
// A_A(x,t) = eta * alpha''_n * A_a(x_n,t).
struct GaugeField {
  std::function<VectorXd(const VectorXd&, double)> lift;
  std::function<VectorXd(const VectorXd&, double)> lift_dt;
  bool time_dependent = false;
  std::string name = "none";

  VectorXd at(const VectorXd& x, double t = 0.0) const {
    return lift(x, t);
  }
  VectorXd ddt(const VectorXd& x, double t) const {
    if (!lift_dt) return VectorXd::Zero(x.size());
    return lift_dt(x, t);
  }

  // Constant physical covector a_phys per spatial axis, replicated per
  // particle and lifted with the couplings.
  static GaugeField uniform(const VectorXd& a_phys, const VectorXd& charges,
                            double eta, int spatial_dim);
  // Symmetric-gauge uniform magnetic field in d=2: A = (-B y/2, B x/2).
  static GaugeField uniform_B(double strength, const VectorXd& charges,
                              double eta, int spatial_dim);
  // Uniform covector ramped linearly in time: A(t) = rate * t * a_phys.
  static GaugeField ramp(const VectorXd& a_phys, double rate,
                         const VectorXd& charges, double eta, int spatial_dim);
};

// Initial state description for the field/wave/walker pipelines.
struct InitialSpec {
  std::string type = "gaussian";  // gaussian | ground | coherent | uniform
  double sigma = 1.0;
  double omega = 1.0;         // ground/coherent
  VectorXd center;            // configuration-space point
  VectorXd momentum;          // plane-wave phase gradient
};

// Full problem statement; immutable after construction.
struct Scenario {
  int n_particles = 1;
  int spatial_dim = 1;
  VectorXd masses;       // per particle
  double eta = 1.0;
  double xi = 0.125;     // hbar^2 = 8 xi
  double dt = 1e-3;      // entropic (walker) step
  double dt_field = 0.0; // field substep; 0 means dt
  double t_final = 1.0;
  Potential potential;
  std::optional<GaugeField> gauge;
  VectorXd charges;      // alpha''_n
  Grid grid;
  InitialSpec initial;
  int n_walkers = 10000;

  int dim() const { return n_particles * spatial_dim; }
  double hbar() const { return std::sqrt(8.0 * xi); }
  double field_dt() const { return dt_field > 0.0 ? dt_field : dt; }
  // Mass of the particle owning configuration coordinate A.
  VectorXd mass_per_coord() const;
  void validate() const;
};

// Loads a scenario from a JSON configuration file. Throws ConfigError with
// a key- and position-precise message on malformed input.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text,
                        const std::string& origin = "<string>");

}  // namespace edyn
