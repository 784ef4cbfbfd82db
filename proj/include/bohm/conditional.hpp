#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bohm/evolve.hpp"
#include "bohm/fields.hpp"
#include "bohm/guidance.hpp"

namespace bohm {

// Q = (X, Y): x_dims are the subsystem axes, y_dims the environment axes.
struct SubsystemSplit {
  std::vector<std::size_t> x_dims;
  std::vector<std::size_t> y_dims;

  // The first nx axes form the subsystem, the rest the environment.
  static SubsystemSplit leading(std::size_t ndim, std::size_t nx);
  // Throws ValidationError unless the two sets are disjoint, nonempty and
  // together cover every axis.
  void validate(std::size_t ndim) const;
};

struct ConditionalSlice {
  WaveFunction raw;                       // Psi(x, Y) on the x grid
  std::optional<WaveFunction> normalized; // empty when not normalizable
  std::vector<double> environment;        // Y
  double parent_time = 0.0;
  bool normalizable = false;
};

// psi(x) = Psi(x, Y): multilinear interpolation along the environment axes
// only, so x-grid nodes stay exact. The slice inherits the parent's global
// factor. A slice whose mean density falls below the velocity density floor
// of the parent is returned with normalizable = false.
ConditionalSlice conditional_wf(const WaveFunction& psi, const SubsystemSplit& split,
                                std::span<const double> environment);

// |<a^, b^>| for the normalized states.
double fidelity(const WaveFunction& a, const WaveFunction& b);
// min over theta of || a^ - exp(i theta) b^ || = sqrt(2 - 2 fidelity).
double ray_distance(const WaveFunction& a, const WaveFunction& b);

// ---------------------------------------------------------------------------
// Effective collapse in a von Neumann measurement.

struct CollapseSetup {
  WaveFunction branch1;  // phi_1 on the system grid
  WaveFunction branch2;  // phi_2 on the same grid
  cplx c1 = 1.0;
  cplx c2 = 0.0;
  WaveFunction pointer;  // chi on a 1D pointer grid
  double pointer_width = 0.5;
  // A(q) over the joint configuration; must not depend on the pointer.
  // Defaults to the sign of the first system coordinate.
  PointerCoupling coupling{};
  double shift = 4.0;  // lambda * tau for A = 1
  std::size_t kick_increments = 8;
  // Free evolution after the kick, integrated with RK4 steps of dt_traj.
  double settle_time = 0.5;
  double dt = 0.005;
  double dt_traj = 0.05;
  std::size_t trials = 10000;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  double guard_widths = 3.0;       // |Y| must exceed this many pointer widths
  double separation_widths = 6.0;  // branches count as separated beyond this
  double overlap_limit = 1e-6;
  double permanence_slack = 1e-6;
  // Trials whose velocity consistency is checked at every checkpoint.
  std::size_t consistency_trials = 64;
};

struct CollapseTrial {
  std::size_t trial = 0;
  double pointer = 0.0;
  int branch = 0;  // 1 or 2; 0 when ambiguous or aborted
  double fidelity = 0.0;
};

struct BranchStats {
  std::size_t trials = 0;
  std::size_t ambiguous = 0;
  std::size_t aborted = 0;
  std::array<std::size_t, 2> counts{};
  std::array<double, 2> born_weight{};  // |c_i|^2 / (|c1|^2 + |c2|^2)
  double frequency1 = 0.0;              // counts[0] / assigned trials
  double sigma1 = 0.0;                  // binomial sigma at born_weight[0]
  std::array<double, 2> mean_fidelity{};
  double mean_fidelity_all = 0.0;
  double min_fidelity = 1.0;
  double pointer_overlap = 0.0;
  // Largest drop in branch fidelity between consecutive checkpoints once
  // the pointer branches are separated.
  double permanence_drop = 0.0;
  bool permanent = true;
  std::size_t checkpoints = 0;
  // Velocity consistency, checked on a fixed subset of trials per checkpoint.
  double max_velocity_deviation = 0.0;
  std::vector<CollapseTrial> log;
  std::vector<std::string> warnings;

  bool born_within(double nsigma) const {
    return std::abs(frequency1 - born_weight[0]) <= nsigma * sigma1;
  }
};

// Samples configurations from |Psi_0|^2 with Psi_0 = (c1 phi_1 + c2 phi_2) x chi,
// applies the kick in increments (moving each configuration with it), lets
// everything evolve freely for settle_time, and classifies every trial by the
// sign of its pointer coordinate. Throws NumericalError when the displaced
// pointer states overlap by more than overlap_limit.
BranchStats collapse_experiment(const CollapseSetup& setup);

// ---------------------------------------------------------------------------
// Emergent Schroedinger evolution of a decoupled subsystem.

struct DecouplingSetup {
  WaveFunction system;       // phi_0
  WaveFunction environment;  // chi_0
  HamiltonianSpec system_h{};
  HamiltonianSpec environment_h{};
  // Adds coupling * x_0 * y_0 to the joint potential (negative control).
  double coupling = 0.0;
  double duration = 1.0;
  double dt = 0.005;
  double dt_traj = 0.05;
  std::uint64_t seed = 1;
  std::optional<std::vector<double>> q0{};  // sampled from |Psi_0|^2 otherwise
};

struct DecouplingReport {
  std::vector<double> times;
  std::vector<double> deviations;  // ray_distance(psi_t, phi_t)
  std::vector<double> environment; // Y_t, row-major
  std::vector<double> q0;
  double max_deviation = 0.0;
  double max_velocity_deviation = 0.0;
};

// Throws NumericalError if the environment trajectory aborts.
DecouplingReport decoupling_experiment(const DecouplingSetup& setup);

// ---------------------------------------------------------------------------
// Time-dependent subsystem dynamics from a stationary universal state.

struct TimelessSetup {
  WaveFunction universe;
  HamiltonianSpec h;
  SubsystemSplit split;
  std::optional<std::vector<double>> q0{};
  double duration = 6.283185307179586;
  double dt = 1e-4;
  double dt_traj = 0.01;
  std::uint64_t seed = 1;
  std::size_t max_resamples = 100;
  double stationarity_tolerance = 1e-8;
  double displacement_threshold = 0.1;
  double ray_change_threshold = 0.1;
};

struct TimelessReport {
  std::vector<double> q0;
  std::size_t resamples = 0;
  double stationarity_defect = 0.0;  // max_t (1 - |<Psi_t, Psi_0>|)
  double max_density_drift = 0.0;    // max_t max_nodes | |Psi_t|^2 - |Psi_0|^2 |
  double max_displacement = 0.0;     // max_t |Q_t - Q_0|
  double max_ray_change = 0.0;       // max_t ray_distance(psi_t, psi_0)
  double winding = 0.0;              // unwrapped polar angle swept about the trap center
  double max_velocity_deviation = 0.0;
  bool stationary = false;
  bool moves = false;
  bool conditional_changes = false;
  std::vector<double> times;
  std::vector<double> path;  // row-major Q_t
};

TimelessReport timeless_experiment(const TimelessSetup& setup);

}  // namespace bohm
