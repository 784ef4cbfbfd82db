#include "bohm/evolve.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "bohm/error.hpp"
#include "fft.hpp"

namespace bohm {

HamiltonianSpec::HamiltonianSpec(Potential potential, std::vector<double> masses)
    : potential_(std::move(potential)), masses_(std::move(masses)) {
  for (double m : masses_) {
    if (!(std::isfinite(m) && m > 0.0)) {
      throw ValidationError("Hamiltonian masses must be positive");
    }
  }
}

HamiltonianSpec HamiltonianSpec::harmonic(std::vector<double> omega,
                                          std::vector<double> center) {
  if (center.empty()) center.assign(omega.size(), 0.0);
  if (center.size() != omega.size()) {
    throw ValidationError("harmonic trap needs one center per frequency");
  }
  for (double w : omega) {
    if (!(std::isfinite(w) && w >= 0.0)) {
      throw ValidationError("trap frequencies must be finite and >= 0");
    }
  }
  HamiltonianSpec h;
  h.trap_ = HarmonicTrap{std::move(omega), std::move(center)};
  return h;
}

HamiltonianSpec HamiltonianSpec::plus(Potential extra) const {
  HamiltonianSpec out(*this);
  out.extras_.push_back(std::move(extra));
  return out;
}

double HamiltonianSpec::potential_at(const GridSpec& grid,
                                     std::span<const double> q) const {
  double v = potential_ ? potential_(q) : 0.0;
  if (trap_) {
    const HarmonicTrap& t = *trap_;
    if (t.omega.size() != grid.ndim()) {
      throw ValidationError("trap has " + std::to_string(t.omega.size()) +
                            " frequencies, grid has " +
                            std::to_string(grid.ndim()) + " axes");
    }
    for (std::size_t k = 0; k < grid.ndim(); ++k) {
      const double z = q[k] - t.center[k];
      v += 0.5 * grid.axis_mass(k) * t.omega[k] * t.omega[k] * z * z;
    }
  }
  for (const Potential& e : extras_) v += e(q);
  return v;
}

std::vector<double> HamiltonianSpec::sample_potential(const GridSpec& grid) const {
  std::vector<double> v(grid.size(), 0.0);
  if (is_free()) return v;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const std::vector<double> q = grid.node_coords(p);
    v[p] = potential_at(grid, q);
    if (!std::isfinite(v[p])) {
      throw ValidationError("potential is not finite at grid node " +
                            std::to_string(p));
    }
  }
  return v;
}

std::vector<double> HamiltonianSpec::axis_masses(const GridSpec& grid) const {
  if (!masses_.empty() && masses_ != grid.masses()) {
    throw ValidationError("Hamiltonian masses do not match the grid masses");
  }
  return grid.axis_masses();
}

namespace {

// Sum over axes of k^2 / 2m at every node, FFT ordering.
std::vector<double> kinetic_symbol(const GridSpec& grid,
                                   const std::vector<double>& masses) {
  std::vector<std::vector<double>> ks;
  for (const Axis& ax : grid.axes()) ks.push_back(wavenumbers(ax, false));
  std::vector<double> t(grid.size(), 0.0);
  std::vector<std::size_t> idx(grid.ndim());
  for (std::size_t p = 0; p < grid.size(); ++p) {
    grid.unravel(p, idx);
    for (std::size_t k = 0; k < grid.ndim(); ++k) {
      const double kk = ks[k][idx[k]];
      t[p] += kk * kk / (2.0 * masses[k]);
    }
  }
  return t;
}

}  // namespace

Propagator::Propagator(const WaveFunction& initial, const HamiltonianSpec& h,
                       double dt, Mode mode)
    : grid_(initial.grid()),
      spin_(initial.spin()),
      factor_(initial.factor()),
      t0_(initial.time()),
      dt_(dt),
      mode_(mode) {
  if (!(std::isfinite(dt) && dt != 0.0)) {
    throw ValidationError("time step must be finite and nonzero");
  }
  if (mode == Mode::imaginary_time && !(dt > 0.0)) {
    throw ValidationError("imaginary time step must be positive");
  }
  const std::vector<double> masses = h.axis_masses(grid_);
  const std::vector<double> v = h.sample_potential(grid_);
  const std::vector<double> t = kinetic_symbol(grid_, masses);

  fft_ = std::make_unique<detail::FftPlan>(grid_, spin_);
  const double scale = fft_->scale();
  half_potential_.resize(grid_.size());
  kinetic_.resize(grid_.size());
  double vmax = 0.0;
  double tmax = 0.0;
  for (std::size_t p = 0; p < grid_.size(); ++p) {
    vmax = std::max(vmax, std::abs(v[p]));
    tmax = std::max(tmax, t[p]);
    if (mode == Mode::real_time) {
      half_potential_[p] = std::polar(1.0, -0.5 * v[p] * dt);
      kinetic_[p] = std::polar(scale, -t[p] * dt);
    } else {
      half_potential_[p] = std::exp(-0.5 * v[p] * dt);
      kinetic_[p] = scale * std::exp(-t[p] * dt);
    }
  }
  if (mode == Mode::real_time) {
    if (std::abs(dt) * vmax > kPhaseWarning) {
      std::ostringstream msg;
      msg << "potential phase per step " << std::abs(dt) * vmax
          << " exceeds the stability threshold";
      warnings_.push_back(msg.str());
    }
    if (std::abs(dt) * tmax > kPhaseWarning) {
      std::ostringstream msg;
      msg << "kinetic phase per step " << std::abs(dt) * tmax
          << " exceeds the stability threshold";
      warnings_.push_back(msg.str());
    }
  }
  const auto raw = initial.raw();
  std::copy(raw.begin(), raw.end(), fft_->data().begin());
}

Propagator::~Propagator() = default;
Propagator::Propagator(Propagator&&) noexcept = default;
Propagator& Propagator::operator=(Propagator&&) noexcept = default;

double Propagator::time() const {
  if (mode_ == Mode::imaginary_time) return t0_;
  return t0_ + static_cast<double>(steps_) * dt_;
}

void Propagator::step(std::size_t nsteps) {
  std::span<cplx> psi = fft_->data();
  const std::size_t n = grid_.size();
  for (std::size_t it = 0; it < nsteps; ++it) {
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t s = 0; s < spin_; ++s) psi[p * spin_ + s] *= half_potential_[p];
    }
    fft_->forward();
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t s = 0; s < spin_; ++s) psi[p * spin_ + s] *= kinetic_[p];
    }
    fft_->backward();
    double sum = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t s = 0; s < spin_; ++s) {
        cplx& a = psi[p * spin_ + s];
        a *= half_potential_[p];
        sum += std::norm(a);
      }
    }
    ++steps_;
    if (!std::isfinite(sum)) {
      throw NumericalError("non-finite amplitudes after propagator step " +
                           std::to_string(steps_));
    }
    if (mode_ == Mode::imaginary_time) {
      if (!(sum > 0.0)) throw NumericalError("imaginary-time state vanished");
      const double inv = 1.0 / std::sqrt(sum * grid_.cell_volume());
      for (cplx& a : psi) a *= inv;
    }
  }
}

WaveFunction Propagator::state() const {
  const std::span<cplx> psi = fft_->data();
  return WaveFunction(grid_, spin_, std::vector<cplx>(psi.begin(), psi.end()),
                      time(), mode_ == Mode::real_time ? factor_ : cplx(1.0));
}

WaveFunction split_step(const WaveFunction& wf, const HamiltonianSpec& h,
                        double dt, std::size_t nsteps) {
  Propagator prop(wf, h, dt);
  prop.step(nsteps);
  return prop.state();
}

WaveFunction apply_hamiltonian(const WaveFunction& wf, const HamiltonianSpec& h) {
  const GridSpec& grid = wf.grid();
  const std::size_t spin = wf.spin();
  const std::vector<double> masses = h.axis_masses(grid);
  const std::vector<double> v = h.sample_potential(grid);
  const std::vector<double> t = kinetic_symbol(grid, masses);

  detail::FftPlan fft(grid, spin);
  const auto raw = wf.raw();
  std::span<cplx> buf = fft.data();
  std::copy(raw.begin(), raw.end(), buf.begin());
  fft.forward();
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (std::size_t s = 0; s < spin; ++s) buf[p * spin + s] *= t[p] * fft.scale();
  }
  fft.backward();
  std::vector<cplx> out(buf.begin(), buf.end());
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (std::size_t s = 0; s < spin; ++s) out[p * spin + s] += v[p] * raw[p * spin + s];
  }
  return WaveFunction(grid, spin, std::move(out), wf.time(), wf.factor());
}

double energy(const WaveFunction& wf, const HamiltonianSpec& h) {
  const WaveFunction hpsi = apply_hamiltonian(wf, h);
  const auto a = wf.raw();
  const auto b = hpsi.raw();
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (std::conj(a[i]) * b[i]).real();
    den += std::norm(a[i]);
  }
  if (!(den > 0.0)) throw NumericalError("energy of a zero wave function");
  return num / den;
}

GroundState ground_state(const HamiltonianSpec& h, const GridSpec& grid,
                         double tol, const GroundStateOptions& options) {
  if (!(tol > 0.0)) throw ValidationError("ground-state tolerance must be positive");
  if (options.check_every == 0) throw ValidationError("check_every must be >= 1");
  std::vector<double> center(grid.ndim());
  std::vector<double> width(grid.ndim());
  std::vector<double> k0(grid.ndim(), 0.0);
  for (std::size_t k = 0; k < grid.ndim(); ++k) {
    const Axis& ax = grid.axis(k);
    center[k] = 0.5 * (ax.lower + ax.upper);
    width[k] = ax.extent() / 8.0;
  }
  const WaveFunction guess = make_gaussian(grid, center, width, k0);

  Propagator prop(guess, h, options.dtau, Propagator::Mode::imaginary_time);
  GroundState out{guess, energy(guess, h), 0, {}};
  out.energy_history.push_back(out.energy);
  while (out.iterations < options.max_iterations) {
    prop.step(options.check_every);
    out.iterations += options.check_every;
    WaveFunction state = prop.state();
    const double e = energy(state, h);
    out.energy_history.push_back(e);
    const double change = std::abs(e - out.energy);
    out.energy = e;
    out.state = std::move(state);
    if (change < tol) return out;
  }
  throw NumericalError("ground state did not converge within " +
                       std::to_string(options.max_iterations) + " iterations");
}

double oscillator_eigenfunction(int n, double q, double omega, double mass,
                                double center) {
  const double a = mass * omega;
  const double z = q - center;
  const double phi0 = std::pow(a / std::numbers::pi, 0.25) * std::exp(-0.5 * a * z * z);
  switch (n) {
    case 0:
      return phi0;
    case 1:
      return std::sqrt(2.0 * a) * z * phi0;
    default:
      throw ValidationError("only oscillator levels 0 and 1 are provided");
  }
}

WaveFunction stationary_rotor(const GridSpec& grid, const HamiltonianSpec& h) {
  if (grid.ndim() != 2) throw ValidationError("stationary_rotor needs a 2D grid");
  if (!h.is_pure_trap()) {
    throw ValidationError("stationary_rotor needs a purely harmonic Hamiltonian");
  }
  const HarmonicTrap& trap = *h.trap();
  if (trap.omega.size() != 2) throw ValidationError("trap must be 2D");
  const double omega = trap.omega[0];
  const std::vector<double> masses = h.axis_masses(grid);
  if (std::abs(trap.omega[1] - omega) > 1e-12 * omega || !(omega > 0.0)) {
    throw ValidationError("rotor needs equal, positive trap frequencies");
  }
  if (std::abs(masses[1] - masses[0]) > 1e-12 * masses[0]) {
    throw ValidationError("rotor needs equal masses on both axes");
  }
  const double m = masses[0];
  const Axis& ax = grid.axis(0);
  const Axis& ay = grid.axis(1);
  std::vector<cplx> amps(grid.size());
  for (std::size_t i = 0; i < ax.npoints; ++i) {
    const double x = ax.node(i);
    const double x0 = oscillator_eigenfunction(0, x, omega, m, trap.center[0]);
    const double x1 = oscillator_eigenfunction(1, x, omega, m, trap.center[0]);
    for (std::size_t j = 0; j < ay.npoints; ++j) {
      const double y = ay.node(j);
      const double y0 = oscillator_eigenfunction(0, y, omega, m, trap.center[1]);
      const double y1 = oscillator_eigenfunction(1, y, omega, m, trap.center[1]);
      amps[i * grid.stride(0) + j] = cplx(x0 * y1, x1 * y0);
    }
  }
  return WaveFunction(grid, 1, std::move(amps)).normalized().materialized();
}

WaveFunction measurement_kick(const WaveFunction& wf, const PointerCoupling& A,
                              double strength, double duration,
                              std::size_t pointer_axis) {
  const GridSpec& grid = wf.grid();
  if (pointer_axis >= grid.ndim()) throw ValidationError("pointer axis out of range");
  if (!(duration > 0.0)) throw ValidationError("kick duration must be positive");
  if (!std::isfinite(strength)) throw ValidationError("kick strength must be finite");
  if (strength == 0.0) return wf;

  const Axis& pax = grid.axis(pointer_axis);
  const std::size_t stride = grid.stride(pointer_axis);
  const std::size_t spin = wf.spin();
  const std::vector<double> k = wavenumbers(pax, false);

  std::vector<std::size_t> line_base;
  std::vector<double> shift;
  bool any = false;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    if ((p / stride) % pax.npoints != 0) continue;
    const std::vector<double> q = grid.node_coords(p);
    const double s = strength * A(q) * duration;
    if (!std::isfinite(s)) throw ValidationError("pointer shift is not finite");
    line_base.push_back(p);
    shift.push_back(s);
    any = any || s != 0.0;
  }
  if (!any) return wf;

  detail::FftPlan fft(grid, spin, std::span(&pointer_axis, 1));
  const auto raw = wf.raw();
  std::span<cplx> buf = fft.data();
  std::copy(raw.begin(), raw.end(), buf.begin());
  fft.forward();
  for (std::size_t l = 0; l < line_base.size(); ++l) {
    for (std::size_t j = 0; j < pax.npoints; ++j) {
      const cplx phase = std::polar(fft.scale(), -k[j] * shift[l]);
      const std::size_t node = line_base[l] + j * stride;
      for (std::size_t s = 0; s < spin; ++s) buf[node * spin + s] *= phase;
    }
  }
  fft.backward();
  std::vector<cplx> out(buf.begin(), buf.end());
  // Unshifted lines keep their exact amplitudes.
  for (std::size_t l = 0; l < line_base.size(); ++l) {
    if (shift[l] != 0.0) continue;
    for (std::size_t j = 0; j < pax.npoints; ++j) {
      const std::size_t node = line_base[l] + j * stride;
      for (std::size_t s = 0; s < spin; ++s) out[node * spin + s] = raw[node * spin + s];
    }
  }
  WaveFunction kicked(grid, spin, std::move(out), wf.time(), wf.factor());
  const double leak = edge_mass(kicked);
  if (leak > 1e-6) {
    std::ostringstream msg;
    msg << "support leak after measurement kick: edge mass " << leak;
    throw DomainError(msg.str());
  }
  return kicked;
}

Configuration kick_configuration(const Configuration& q, const PointerCoupling& A,
                                 double strength, double duration,
                                 std::size_t pointer_axis) {
  if (pointer_axis >= q.coords.size()) throw ValidationError("pointer axis out of range");
  Configuration out = q;
  out.coords[pointer_axis] += strength * A(q.coords) * duration;
  return out;
}

}  // namespace bohm
