#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bohm/fields.hpp"

namespace bohm {

namespace detail {
class FftPlan;
}

// V(q) = sum_k 1/2 m_k omega_k^2 (q_k - c_k)^2, masses taken from the grid.
struct HarmonicTrap {
  std::vector<double> omega;
  std::vector<double> center;
};

// H = -sum_k 1/(2 m_k) d^2/dq_k^2 + V(q), hbar = 1. Spin-independent.
class HamiltonianSpec {
 public:
  using Potential = std::function<double(std::span<const double>)>;

  // Free particles.
  HamiltonianSpec() = default;
  // masses (per particle) are optional; when given they must match the grid.
  explicit HamiltonianSpec(Potential potential, std::vector<double> masses = {});

  static HamiltonianSpec harmonic(std::vector<double> omega,
                                  std::vector<double> center = {});

  // Adds another term to the potential.
  HamiltonianSpec plus(Potential extra) const;

  const std::optional<HarmonicTrap>& trap() const { return trap_; }
  // A harmonic trap and nothing else.
  bool is_pure_trap() const { return trap_ && !potential_ && extras_.empty(); }
  bool is_free() const { return !potential_ && !trap_ && extras_.empty(); }

  // Potential sampled at every grid node; throws on non-finite samples.
  std::vector<double> sample_potential(const GridSpec& grid) const;
  double potential_at(const GridSpec& grid, std::span<const double> q) const;
  // Per-axis masses; throws when explicit masses disagree with the grid.
  std::vector<double> axis_masses(const GridSpec& grid) const;

 private:
  Potential potential_;
  std::optional<HarmonicTrap> trap_;
  std::vector<Potential> extras_;
  std::vector<double> masses_;
};

// Strang split-step propagator,
//   exp(-i V dt/2) F^-1 exp(-i sum k^2 dt / 2m) F exp(-i V dt/2),
// or, in imaginary time, the same product with -i dt replaced by -dtau and a
// renormalization after each step. Works on raw amplitudes; the global factor
// of the initial state is carried along untouched.
class Propagator {
 public:
  enum class Mode { real_time, imaginary_time };

  // Phases per step above this trigger a stability warning.
  static constexpr double kPhaseWarning = 3.14159265358979;

  Propagator(const WaveFunction& initial, const HamiltonianSpec& h, double dt,
             Mode mode = Mode::real_time);
  ~Propagator();
  Propagator(Propagator&&) noexcept;
  Propagator& operator=(Propagator&&) noexcept;

  void step(std::size_t nsteps = 1);
  WaveFunction state() const;

  double dt() const { return dt_; }
  double time() const;
  std::size_t steps_taken() const { return steps_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  GridSpec grid_;
  std::size_t spin_;
  cplx factor_;
  double t0_;
  double dt_;
  Mode mode_;
  std::size_t steps_ = 0;
  std::vector<cplx> half_potential_;
  std::vector<cplx> kinetic_;
  std::unique_ptr<detail::FftPlan> fft_;
  std::vector<std::string> warnings_;
};

WaveFunction split_step(const WaveFunction& wf, const HamiltonianSpec& h,
                        double dt, std::size_t nsteps);

// H psi evaluated spectrally, factor included.
WaveFunction apply_hamiltonian(const WaveFunction& wf, const HamiltonianSpec& h);
// <psi|H|psi> / <psi|psi>.
double energy(const WaveFunction& wf, const HamiltonianSpec& h);

struct GroundStateOptions {
  double dtau = 0.01;
  std::size_t check_every = 10;
  std::size_t max_iterations = 1'000'000;
};

struct GroundState {
  WaveFunction state;
  double energy = 0.0;
  std::size_t iterations = 0;
  // Rayleigh quotient at every convergence check, starting from the guess.
  std::vector<double> energy_history;
};

// Imaginary-time relaxation from a broad real Gaussian at the box center,
// stopping once the Rayleigh quotient changes by less than tol between
// checks. Throws NumericalError when the iteration budget runs out.
GroundState ground_state(const HamiltonianSpec& h, const GridSpec& grid,
                         double tol, const GroundStateOptions& options = {});

// Oscillator eigenfunction phi_n (n = 0, 1) of frequency omega and mass m
// centered at c, evaluated at q.
double oscillator_eigenfunction(int n, double q, double omega, double mass,
                                double center = 0.0);

// phi0(x) phi1(y) + i phi1(x) phi0(y) for an isotropic 2D harmonic trap: an
// exact energy eigenstate (E = 2 omega) carrying a circulating current.
WaveFunction stationary_rotor(const GridSpec& grid, const HamiltonianSpec& h);

using PointerCoupling = std::function<double(std::span<const double>)>;

// Impulsive von Neumann interaction lambda A(q) p_pointer over a duration tau:
// every line of psi along the pointer axis is translated by lambda A(q) tau,
// where A sees the node coordinates of the line start (A must not depend on
// the pointer coordinate). Translations are spectral.
// Throws DomainError when the shifted state leaks into the box edges.
WaveFunction measurement_kick(const WaveFunction& wf, const PointerCoupling& A,
                              double strength, double duration,
                              std::size_t pointer_axis);
inline WaveFunction measurement_kick(const WaveFunction& wf,
                                     const PointerCoupling& A, double strength,
                                     double duration) {
  return measurement_kick(wf, A, strength, duration, wf.grid().ndim() - 1);
}

// Bohmian transport of a configuration through the same impulsive kick: the
// pointer coordinate moves by lambda A(q) tau, the rest stays put.
Configuration kick_configuration(const Configuration& q, const PointerCoupling& A,
                                 double strength, double duration,
                                 std::size_t pointer_axis);

}  // namespace bohm
