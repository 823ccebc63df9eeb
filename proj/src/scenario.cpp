#include "edyn/scenario.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace edyn {

using nlohmann::json;

Potential Potential::free() {
  Potential p;
  p.name = "free";
  p.value = [](const VectorXd&, double) { return 0.0; };
  return p;
}

Potential Potential::harmonic(double omega, const VectorXd& m) {
  Potential p;
  p.name = "harmonic";
  p.value = [omega, m](const VectorXd& x, double) {
    double v = 0.0;
    for (Eigen::Index a = 0; a < x.size(); ++a)
      v += 0.5 * m[a] * omega * omega * x[a] * x[a];
    return v;
  };
  return p;
}

Potential Potential::barrier(double height, double width, double center) {
  Potential p;
  p.name = "barrier";
  p.value = [height, width, center](const VectorXd& x, double) {
    double r2 = 0.0;
    for (Eigen::Index a = 0; a < x.size(); ++a) {
      const double d = x[a] - center;
      r2 += d * d;
    }
    return height * std::exp(-r2 / (2.0 * width * width));
  };
  return p;
}

Potential Potential::driven(double E, double Omega) {
  Potential p;
  p.name = "driven";
  p.time_dependent = true;
  p.value = [E, Omega](const VectorXd& x, double t) {
    return E * std::sin(Omega * t) * x.sum();
  };
  p.dt_value = [E, Omega](const VectorXd& x, double t) {
    return E * Omega * std::cos(Omega * t) * x.sum();
  };
  return p;
}

namespace {

VectorXd lift_physical(const VectorXd& a_phys, const VectorXd& charges,
                       double eta, int spatial_dim, Eigen::Index dim) {
  VectorXd out(dim);
  for (Eigen::Index A = 0; A < dim; ++A) {
    const Eigen::Index n = A / spatial_dim;
    const Eigen::Index a = A % spatial_dim;
    out[A] = eta * charges[n] * a_phys[a];
  }
  return out;
}

}  // namespace

GaugeField GaugeField::uniform(const VectorXd& a_phys, const VectorXd& charges,
                               double eta, int spatial_dim) {
  GaugeField g;
  g.name = "uniform";
  g.lift = [=](const VectorXd& x, double) {
    return lift_physical(a_phys, charges, eta, spatial_dim, x.size());
  };
  return g;
}

GaugeField GaugeField::uniform_B(double strength, const VectorXd& charges,
                                 double eta, int spatial_dim) {
  if (spatial_dim != 2)
    throw ConfigError("uniform_B vector potential requires spatial_dim = 2");
  GaugeField g;
  g.name = "uniform_B";
  g.lift = [=](const VectorXd& x, double) {
    VectorXd out(x.size());
    for (Eigen::Index A = 0; A < x.size(); ++A) {
      const Eigen::Index n = A / 2;
      const Eigen::Index a = A % 2;
      const double xn0 = x[2 * n], xn1 = x[2 * n + 1];
      const double a_phys = (a == 0) ? -0.5 * strength * xn1
                                     : 0.5 * strength * xn0;
      out[A] = eta * charges[n] * a_phys;
    }
    return out;
  };
  return g;
}

GaugeField GaugeField::ramp(const VectorXd& a_phys, double rate,
                            const VectorXd& charges, double eta,
                            int spatial_dim) {
  GaugeField g;
  g.name = "ramp";
  g.time_dependent = true;
  g.lift = [=](const VectorXd& x, double t) {
    return VectorXd(rate * t *
                    lift_physical(a_phys, charges, eta, spatial_dim, x.size()));
  };
  g.lift_dt = [=](const VectorXd& x, double) {
    return VectorXd(rate *
                    lift_physical(a_phys, charges, eta, spatial_dim, x.size()));
  };
  return g;
}

VectorXd Scenario::mass_per_coord() const {
  VectorXd m(dim());
  for (int A = 0; A < dim(); ++A) m[A] = masses[A / spatial_dim];
  return m;
}

void Scenario::validate() const {
  if (n_particles < 1) throw ConfigError("particles must be >= 1");
  if (spatial_dim < 1 || spatial_dim > 3)
    throw ConfigError("spatial_dim must be 1, 2 or 3");
  if (masses.size() != n_particles)
    throw ConfigError("masses must list one value per particle");
  if ((masses.array() <= 0.0).any()) throw ConfigError("all masses must be > 0");
  if (eta <= 0.0) throw ConfigError("eta must be > 0");
  if (xi < 0.0) throw ConfigError("xi must be >= 0");
  if (dt <= 0.0) throw ConfigError("dt must be > 0");
  if (t_final < 0.0) throw ConfigError("t_final must be >= 0");
  if (charges.size() != n_particles)
    throw ConfigError("charges must list one value per particle");
  if (grid.size() > 0 && grid.dim() != dim())
    throw ConfigError("grid dimension must equal particles * spatial_dim");
  if (grid.size() > 0 && dim() > 2)
    throw ConfigError(
        "grid-based solvers support particles * spatial_dim <= 2");
}

namespace {

[[noreturn]] void fail(const std::string& origin, const std::string& msg) {
  throw ConfigError(origin + ": " + msg);
}

VectorXd as_vector(const json& j, Eigen::Index expect, const std::string& origin,
                   const std::string& key) {
  if (!j.is_array()) fail(origin, "'" + key + "' must be an array");
  if (expect >= 0 && static_cast<Eigen::Index>(j.size()) != expect)
    fail(origin, "'" + key + "' must have " + std::to_string(expect) +
                     " entries");
  VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(origin, "'" + key + "' entries must be numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }

  Scenario s;
  try {
    s.n_particles = j.value("particles", 1);
    s.spatial_dim = j.value("spatial_dim", 1);
    if (j.contains("masses"))
      s.masses = as_vector(j["masses"], s.n_particles, origin, "masses");
    else
      s.masses = VectorXd::Ones(s.n_particles);
    s.eta = j.value("eta", 1.0);
    s.xi = j.value("xi", 0.125);
    s.dt = j.value("dt", 1e-3);
    s.dt_field = j.value("dt_field", 0.0);
    s.t_final = j.value("t_final", 1.0);
    s.n_walkers = j.value("walkers", 10000);
    if (j.contains("charges"))
      s.charges = as_vector(j["charges"], s.n_particles, origin, "charges");
    else
      s.charges = VectorXd::Ones(s.n_particles);

    Boundary boundary = Boundary::Periodic;
    const std::string bstr = j.value("boundary", "periodic");
    if (bstr == "periodic")
      boundary = Boundary::Periodic;
    else if (bstr == "reflecting")
      boundary = Boundary::Reflecting;
    else
      fail(origin, "boundary must be 'periodic' or 'reflecting'");

    const int D = s.dim();
    if (j.contains("grid")) {
      const json& jg = j["grid"];
      if (D > 2) fail(origin, "grid requires particles * spatial_dim <= 2");
      VectorXd gmin = as_vector(jg.at("min"), D, origin, "grid.min");
      VectorXd gmax = as_vector(jg.at("max"), D, origin, "grid.max");
      if (!jg.contains("points")) fail(origin, "grid.points is required");
      std::array<int, 2> np{1, 1};
      for (int a = 0; a < D; ++a) {
        np[a] = jg["points"][a].get<int>();
        if (!power_of_two(np[a]))
          fail(origin, "grid.points entries must be powers of two");
      }
      std::array<double, 2> mn{gmin[0], D > 1 ? gmin[1] : 0.0};
      std::array<double, 2> mx{gmax[0], D > 1 ? gmax[1] : 1.0};
      s.grid = Grid(D, np, mn, mx, boundary);
    }

    if (j.contains("potential")) {
      const json& jp = j["potential"];
      const std::string type = jp.value("type", "free");
      if (type == "free")
        s.potential = Potential::free();
      else if (type == "harmonic")
        s.potential = Potential::harmonic(jp.value("omega", 1.0),
                                          s.mass_per_coord());
      else if (type == "barrier")
        s.potential = Potential::barrier(jp.value("height", 1.0),
                                         jp.value("width", 1.0),
                                         jp.value("center", 0.0));
      else if (type == "driven")
        s.potential = Potential::driven(jp.value("E", 1.0),
                                        jp.value("Omega", 1.0));
      else
        fail(origin, "unknown potential type '" + type + "'");
    } else {
      s.potential = Potential::free();
    }

    if (j.contains("vector_potential")) {
      const json& ja = j["vector_potential"];
      const std::string type = ja.value("type", "none");
      if (type == "none") {
        // no gauge field
      } else if (type == "uniform") {
        VectorXd a = as_vector(ja.at("components"), s.spatial_dim, origin,
                               "vector_potential.components");
        s.gauge = GaugeField::uniform(a, s.charges, s.eta, s.spatial_dim);
      } else if (type == "uniform_B") {
        s.gauge = GaugeField::uniform_B(ja.value("strength", 1.0), s.charges,
                                        s.eta, s.spatial_dim);
      } else if (type == "ramp") {
        VectorXd a = as_vector(ja.at("components"), s.spatial_dim, origin,
                               "vector_potential.components");
        s.gauge = GaugeField::ramp(a, ja.value("rate", 1.0), s.charges, s.eta,
                                   s.spatial_dim);
      } else {
        fail(origin, "unknown vector_potential type '" + type + "'");
      }
    }

    if (j.contains("initial")) {
      const json& ji = j["initial"];
      s.initial.type = ji.value("type", "gaussian");
      s.initial.sigma = ji.value("sigma", 1.0);
      s.initial.omega = ji.value("omega", 1.0);
      if (ji.contains("center"))
        s.initial.center = as_vector(ji["center"], D, origin, "initial.center");
      else
        s.initial.center = VectorXd::Zero(D);
      if (ji.contains("momentum"))
        s.initial.momentum =
            as_vector(ji["momentum"], D, origin, "initial.momentum");
      else
        s.initial.momentum = VectorXd::Zero(D);
    } else {
      s.initial.center = VectorXd::Zero(D);
      s.initial.momentum = VectorXd::Zero(D);
    }
  } catch (const json::exception& e) {
    throw ConfigError(origin + ": " + e.what());
  }

  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

}  // namespace edyn
