#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "bohm/conditional.hpp"
#include "bohm/equilibrium.hpp"
#include "bohm/error.hpp"
#include "bohm/evolve.hpp"
#include "bohm/fields.hpp"
#include "bohm/guidance.hpp"
#include "bohm/scenario.hpp"
#include "bohm/snapshot.hpp"

namespace py = pybind11;
using namespace bohm;

namespace {

std::vector<py::ssize_t> wave_shape(const WaveFunction& wf) {
  std::vector<py::ssize_t> shape;
  for (const Axis& a : wf.grid().axes()) shape.push_back(static_cast<py::ssize_t>(a.npoints));
  if (wf.spin() > 1) shape.push_back(static_cast<py::ssize_t>(wf.spin()));
  return shape;
}

// Amplitudes as an array of shape (n0, ..., n_{d-1}[, S]) with the global
// factor applied.
py::array_t<cplx> amplitudes(const WaveFunction& wf) {
  const std::vector<cplx> a = wf.amplitudes();
  py::array_t<cplx> out(wave_shape(wf));
  std::copy(a.begin(), a.end(), out.mutable_data());
  return out;
}

WaveFunction from_array(const GridSpec& grid,
                        py::array_t<cplx, py::array::c_style | py::array::forcecast> a,
                        std::size_t spin, double time) {
  if (static_cast<std::size_t>(a.size()) != grid.size() * spin) {
    throw ValidationError("array has " + std::to_string(a.size()) + " amplitudes, expected " +
                          std::to_string(grid.size() * spin));
  }
  return WaveFunction(grid, spin, std::vector<cplx>(a.data(), a.data() + a.size()), time);
}

py::array_t<double> as_rows(const std::vector<double>& flat, std::size_t ndim) {
  py::array_t<double> out({static_cast<py::ssize_t>(ndim ? flat.size() / ndim : 0),
                           static_cast<py::ssize_t>(ndim)});
  std::copy(flat.begin(), flat.end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bohmian mechanics on configuration-space grids";

  auto base = py::register_exception<Error>(m, "BohmError", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  auto domain = py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<NodeError>(m, "NodeError", domain.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  // fields ------------------------------------------------------------------
  py::class_<Axis>(m, "Axis")
      .def(py::init([](double lo, double hi, std::size_t n) { return Axis{lo, hi, n}; }),
           py::arg("lower"), py::arg("upper"), py::arg("npoints"))
      .def_readonly("lower", &Axis::lower)
      .def_readonly("upper", &Axis::upper)
      .def_readonly("npoints", &Axis::npoints)
      .def_property_readonly("spacing", &Axis::spacing)
      .def("node", &Axis::node)
      .def("__repr__", [](const Axis& a) {
        return "Axis(" + std::to_string(a.lower) + ", " + std::to_string(a.upper) + ", " +
               std::to_string(a.npoints) + ")";
      });

  py::class_<GridSpec>(m, "GridSpec")
      .def(py::init<std::vector<Axis>, std::vector<std::size_t>, std::vector<double>>(),
           py::arg("axes"), py::arg("particle_of_axis") = std::vector<std::size_t>{},
           py::arg("masses") = std::vector<double>{})
      .def_static("line", &GridSpec::line, py::arg("lower"), py::arg("upper"), py::arg("npoints"),
                  py::arg("mass") = 1.0)
      .def_static("product", &GridSpec::product)
      .def_property_readonly("ndim", &GridSpec::ndim)
      .def_property_readonly("size", &GridSpec::size)
      .def_property_readonly("axes", &GridSpec::axes)
      .def_property_readonly("masses", &GridSpec::masses)
      .def_property_readonly("particle_of_axis", &GridSpec::particle_of_axis)
      .def_property_readonly("cell_volume", &GridSpec::cell_volume)
      .def("axis_masses", &GridSpec::axis_masses)
      .def("sub_grid", [](const GridSpec& g, std::vector<std::size_t> dims) {
        return g.sub_grid(dims);
      })
      .def("coordinates", [](const GridSpec& g, std::size_t k) {
        const Axis& a = g.axis(k);
        py::array_t<double> out(static_cast<py::ssize_t>(a.npoints));
        for (std::size_t i = 0; i < a.npoints; ++i) out.mutable_data()[i] = a.node(i);
        return out;
      });

  py::class_<WaveFunction>(m, "WaveFunction")
      .def(py::init(&from_array), py::arg("grid"), py::arg("amplitudes"), py::arg("spin") = 1,
           py::arg("time") = 0.0)
      .def_property_readonly("grid", &WaveFunction::grid)
      .def_property_readonly("spin", &WaveFunction::spin)
      .def_property_readonly("time", &WaveFunction::time)
      .def_property_readonly("amplitudes", &amplitudes)
      .def("scaled", &WaveFunction::scaled)
      .def("normalized", &WaveFunction::normalized)
      .def("__mul__", &WaveFunction::scaled)
      .def("__rmul__", &WaveFunction::scaled);

  m.def("make_gaussian",
        [](const GridSpec& g, std::vector<double> c, std::vector<double> w, std::vector<double> k,
           std::vector<cplx> spinor) { return make_gaussian(g, c, w, k, spinor); },
        py::arg("grid"), py::arg("center"), py::arg("width"), py::arg("wavevector"),
        py::arg("spinor") = std::vector<cplx>{});
  m.def("norm", &norm);
  m.def("inner", &inner);
  m.def("evaluate", [](const WaveFunction& wf, std::vector<double> q) { return evaluate(wf, q); });
  m.def("tensor_product", &tensor_product);
  m.def("densities", [](const WaveFunction& wf) {
    const std::vector<double> d = node_densities(wf);
    std::vector<py::ssize_t> shape = wave_shape(wf);
    if (wf.spin() > 1) shape.pop_back();
    py::array_t<double> out(shape);
    std::copy(d.begin(), d.end(), out.mutable_data());
    return out;
  });
  m.def("edge_mass", &edge_mass, py::arg("wf"), py::arg("fraction") = 0.05);
  m.def("write_snapshot", py::overload_cast<const std::filesystem::path&, const WaveFunction&>(
                              &write_snapshot));
  m.def("read_snapshot", py::overload_cast<const std::filesystem::path&>(&read_snapshot));

  // evolve ------------------------------------------------------------------
  py::class_<HamiltonianSpec>(m, "HamiltonianSpec")
      .def(py::init<>())
      .def(py::init([](std::function<double(std::vector<double>)> v) {
             return HamiltonianSpec(
                 [v](std::span<const double> q) {
                   py::gil_scoped_acquire gil;
                   return v(std::vector<double>(q.begin(), q.end()));
                 });
           }),
           py::arg("potential"))
      .def_static("free", [] { return HamiltonianSpec(); })
      .def_static("harmonic", &HamiltonianSpec::harmonic, py::arg("omega"),
                  py::arg("center") = std::vector<double>{})
      .def("potential", [](const HamiltonianSpec& h, const GridSpec& g) {
        const std::vector<double> v = h.sample_potential(g);
        return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
      });

  m.def("split_step", &split_step, py::arg("wf"), py::arg("h"), py::arg("dt"),
        py::arg("nsteps"));
  m.def("energy", &energy);
  py::class_<GroundState>(m, "GroundState")
      .def_readonly("state", &GroundState::state)
      .def_readonly("energy", &GroundState::energy)
      .def_readonly("iterations", &GroundState::iterations)
      .def_readonly("energy_history", &GroundState::energy_history);
  m.def("ground_state",
        [](const HamiltonianSpec& h, const GridSpec& g, double tol, double dtau) {
          GroundStateOptions o;
          o.dtau = dtau;
          return ground_state(h, g, tol, o);
        },
        py::arg("h"), py::arg("grid"), py::arg("tol") = 1e-12, py::arg("dtau") = 0.01);
  m.def("stationary_rotor", &stationary_rotor);
  m.def("oscillator_eigenfunction", &oscillator_eigenfunction, py::arg("n"), py::arg("q"),
        py::arg("omega") = 1.0, py::arg("mass") = 1.0, py::arg("center") = 0.0);
  m.def("measurement_kick",
        [](const WaveFunction& wf, std::function<double(std::vector<double>)> A, double strength,
           double duration) {
          return measurement_kick(
              wf, [A](std::span<const double> q) { return A({q.begin(), q.end()}); }, strength,
              duration);
        },
        py::arg("wf"), py::arg("A"), py::arg("strength"), py::arg("duration") = 1.0);

  // guidance ----------------------------------------------------------------
  m.def("velocity",
        [](const WaveFunction& wf, std::vector<double> q, std::vector<double> masses) {
          return velocity(wf, q, masses);
        },
        py::arg("wf"), py::arg("q"), py::arg("masses") = std::vector<double>{});
  m.def("integrate_trajectory",
        [](const WaveFunction& wf, std::optional<HamiltonianSpec> h, std::vector<double> q0,
           double T, double dt_traj, double dt) {
          std::unique_ptr<WaveSource> src;
          if (h) {
            src = std::make_unique<PropagatedSource>(wf, *h, dt > 0.0 ? dt : 0.5 * dt_traj);
          } else {
            src = std::make_unique<StationarySource>(wf);
          }
          const Trajectory tr =
              integrate_trajectory(*src, Configuration{q0, wf.time()}, wf.time(),
                                   wf.time() + T, dt_traj);
          std::vector<double> flat;
          for (const Configuration& c : tr.states) flat.insert(flat.end(), c.coords.begin(), c.coords.end());
          return py::make_tuple(tr.times, as_rows(flat, q0.size()), to_string(tr.status));
        },
        py::arg("wf"), py::arg("h"), py::arg("q0"), py::arg("T"), py::arg("dt_traj"),
        py::arg("dt") = 0.0,
        "Returns (times, positions, status). With h=None the field is held fixed.");

  // equilibrium -------------------------------------------------------------
  m.def("sample",
        [](const WaveFunction& wf, std::size_t n, std::uint64_t seed) {
          const SampleSet s = sample(wf, n, seed);
          return as_rows(s.coords, s.ndim);
        },
        py::arg("wf"), py::arg("n"), py::arg("seed"));
  py::class_<FitReport>(m, "FitReport")
      .def_property_readonly("kind", [](const FitReport& f) { return to_string(f.kind); })
      .def_readonly("dim", &FitReport::dim)
      .def_readonly("n", &FitReport::n)
      .def_readonly("statistic", &FitReport::statistic)
      .def_readonly("threshold", &FitReport::threshold)
      .def_readonly("passed", &FitReport::pass)
      .def_readonly("aborted_count", &FitReport::aborted_count);
  m.def("ks_marginal",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> samples,
           const WaveFunction& wf, std::size_t dim, double alpha) {
          const std::size_t ndim = wf.grid().ndim();
          return ks_marginal(std::span(samples.data(), static_cast<std::size_t>(samples.size())),
                             ndim, wf, dim, alpha);
        },
        py::arg("samples"), py::arg("wf"), py::arg("dim"), py::arg("alpha") = 0.01);
  py::class_<EquivarianceReport>(m, "EquivarianceReport")
      .def_readonly("seed", &EquivarianceReport::seed)
      .def_readonly("n", &EquivarianceReport::n)
      .def_readonly("aborted", &EquivarianceReport::aborted)
      .def_readonly("valid", &EquivarianceReport::valid)
      .def_readonly("passed", &EquivarianceReport::pass)
      .def_readonly("marginals", &EquivarianceReport::marginals);
  m.def("equivariance_experiment",
        [](const WaveFunction& wf, const HamiltonianSpec& h, double T, std::size_t n,
           std::uint64_t seed, double dt, double dt_traj, double velocity_scale) {
          EquivarianceOptions o;
          o.dt = dt;
          o.dt_traj = dt_traj;
          o.velocity_scale = velocity_scale;
          py::gil_scoped_release release;
          return equivariance_experiment(wf, h, T, n, seed, o);
        },
        py::arg("wf"), py::arg("h"), py::arg("T"), py::arg("n"), py::arg("seed"),
        py::arg("dt") = 0.005, py::arg("dt_traj") = 0.05, py::arg("velocity_scale") = 1.0);

  // conditional -------------------------------------------------------------
  py::class_<SubsystemSplit>(m, "SubsystemSplit")
      .def(py::init([](std::vector<std::size_t> x, std::vector<std::size_t> y) {
             return SubsystemSplit{std::move(x), std::move(y)};
           }),
           py::arg("x_dims"), py::arg("y_dims"))
      .def_readonly("x_dims", &SubsystemSplit::x_dims)
      .def_readonly("y_dims", &SubsystemSplit::y_dims);
  py::class_<ConditionalSlice>(m, "ConditionalSlice")
      .def_readonly("raw", &ConditionalSlice::raw)
      .def_readonly("normalized", &ConditionalSlice::normalized)
      .def_readonly("environment", &ConditionalSlice::environment)
      .def_readonly("normalizable", &ConditionalSlice::normalizable);
  m.def("conditional_wf",
        [](const WaveFunction& psi, const SubsystemSplit& s, std::vector<double> y) {
          return conditional_wf(psi, s, y);
        });
  m.def("fidelity", &fidelity);
  m.def("ray_distance", &ray_distance);
  m.def("subsystem_velocity_consistency",
        [](const WaveFunction& psi, const SubsystemSplit& s, std::vector<double> q) {
          const VelocityConsistency c = subsystem_velocity_consistency(psi, s, q);
          return py::make_tuple(c.joint, c.conditional, c.deviation);
        },
        "Returns (joint_x_velocity, conditional_velocity, deviation).");

  // scenarios ---------------------------------------------------------------
  m.def("list_scenarios", [] {
    py::list out;
    for (const ScenarioInfo& s : list_scenarios()) {
      out.append(py::make_tuple(s.name, s.experiment, s.description));
    }
    return out;
  });
  m.def("describe_scenario", &describe_scenario);
  m.def("run_scenario",
        [](const std::string& target, std::optional<std::filesystem::path> out,
           std::optional<std::uint64_t> seed, std::size_t threads) {
          RunOptions o;
          o.out_dir = std::move(out);
          o.seed = seed;
          o.threads = threads;
          RunResult r;
          {
            py::gil_scoped_release release;
            r = run_scenario(std::string_view(target), o);
          }
          py::dict d;
          d["exit_code"] = r.exit_code;
          d["status"] = r.status;
          d["message"] = r.message;
          d["out_dir"] = r.out_dir;
          d["artifacts"] = r.artifacts;
          return d;
        },
        py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
        py::arg("threads") = 1);
}
