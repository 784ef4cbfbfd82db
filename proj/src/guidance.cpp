#include "bohm/guidance.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "bohm/conditional.hpp"
#include "bohm/error.hpp"
#include "fft.hpp"
#include "parallel.hpp"
#include "stencil.hpp"

namespace bohm {
namespace {

constexpr std::size_t kMaxPerNode = 64;

}  // namespace

VelocityField::VelocityField(const WaveFunction& wf, std::vector<double> axis_masses)
    : VelocityField(std::make_shared<const WaveFunction>(wf), std::move(axis_masses)) {}

VelocityField::VelocityField(std::shared_ptr<const WaveFunction> wf,
                             std::vector<double> axis_masses)
    : wf_(std::move(wf)) {
  const GridSpec& grid = wf_->grid();
  ndim_ = grid.ndim();
  spin_ = wf_->spin();
  per_node_ = spin_ * (ndim_ + 1);
  if (per_node_ > kMaxPerNode) {
    throw ValidationError("too many spin components for velocity evaluation");
  }
  if (axis_masses.empty()) axis_masses = grid.axis_masses();
  if (axis_masses.size() != ndim_) {
    throw ValidationError("velocity needs one mass per grid axis");
  }
  inv_mass_.resize(ndim_);
  for (std::size_t k = 0; k < ndim_; ++k) {
    if (!(axis_masses[k] > 0.0)) throw ValidationError("masses must be positive");
    inv_mass_[k] = 1.0 / axis_masses[k];
  }
  floor_ = kDensityFloor * wf_->raw_mean_density();

  const std::size_t n = grid.size();
  const auto raw = wf_->raw();
  table_.resize(n * per_node_);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t s = 0; s < spin_; ++s) table_[p * per_node_ + s] = raw[p * spin_ + s];
  }

  detail::FftPlan fft(grid, spin_);
  std::span<cplx> buf = fft.data();
  std::copy(raw.begin(), raw.end(), buf.begin());
  fft.forward();
  const std::vector<cplx> spectrum(buf.begin(), buf.end());
  std::vector<std::size_t> idx(ndim_);
  for (std::size_t k = 0; k < ndim_; ++k) {
    const std::vector<double> kk = wavenumbers(grid.axis(k), true);
    for (std::size_t p = 0; p < n; ++p) {
      const cplx factor(0.0, kk[(p / grid.stride(k)) % grid.axis(k).npoints] * fft.scale());
      for (std::size_t s = 0; s < spin_; ++s) buf[p * spin_ + s] = factor * spectrum[p * spin_ + s];
    }
    fft.backward();
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t s = 0; s < spin_; ++s) {
        table_[p * per_node_ + (k + 1) * spin_ + s] = buf[p * spin_ + s];
      }
    }
  }
}

VelocityField::Status VelocityField::density_and_current(
    std::span<const double> q, double& density,
    std::span<double> current) const noexcept {
  detail::Stencil st;
  if (q.size() != ndim_ || !detail::make_stencil(wf_->grid(), q, st)) {
    return Status::outside;
  }
  std::array<cplx, kMaxPerNode> vals{};
  for (std::size_t c = 0; c < st.count; ++c) {
    const cplx* row = &table_[st.offset[c] * per_node_];
    const double w = st.weight[c];
    for (std::size_t i = 0; i < per_node_; ++i) vals[i] += w * row[i];
  }
  density = 0.0;
  for (std::size_t s = 0; s < spin_; ++s) density += std::norm(vals[s]);
  for (std::size_t k = 0; k < ndim_; ++k) {
    double im = 0.0;
    const cplx* grad = &vals[(k + 1) * spin_];
    for (std::size_t s = 0; s < spin_; ++s) im += (std::conj(vals[s]) * grad[s]).imag();
    current[k] = im;
  }
  if (!(density >= floor_) || density == 0.0) return Status::node;
  return Status::ok;
}

VelocityField::Status VelocityField::eval(std::span<const double> q,
                                          std::span<double> v) const noexcept {
  double density = 0.0;
  const Status st = density_and_current(q, density, v);
  if (st != Status::ok) return st;
  for (std::size_t k = 0; k < ndim_; ++k) v[k] = inv_mass_[k] * v[k] / density;
  return Status::ok;
}

std::vector<double> VelocityField::operator()(std::span<const double> q) const {
  if (q.size() != ndim_) {
    throw ValidationError("configuration has " + std::to_string(q.size()) +
                          " coordinates, grid has " + std::to_string(ndim_));
  }
  std::vector<double> v(ndim_);
  switch (eval(q, v)) {
    case Status::ok:
      return v;
    case Status::node:
      throw NodeError("density below the node floor at the evaluation point");
    case Status::outside:
      break;
  }
  throw DomainError("configuration outside the grid domain");
}

std::vector<double> velocity(const WaveFunction& wf, std::span<const double> q,
                             std::span<const double> axis_masses) {
  const VelocityField field(wf, std::vector<double>(axis_masses.begin(), axis_masses.end()));
  return field(q);
}

StationarySource::StationarySource(const WaveFunction& wf)
    : field_(std::make_shared<const VelocityField>(wf)) {}

std::shared_ptr<const VelocityField> StationarySource::field_at(double) {
  return field_;
}

PropagatedSource::PropagatedSource(const WaveFunction& initial,
                                   const HamiltonianSpec& h, double dt)
    : prop_(initial, h, dt), t0_(initial.time()) {
  if (!(dt > 0.0)) throw ValidationError("propagator step must be positive");
}

std::shared_ptr<const VelocityField> PropagatedSource::field_at(double t) {
  const double x = (t - t0_) / prop_.dt();
  const double r = std::nearbyint(x);
  if (std::abs(x - r) > 1e-6 || r < 0.0) {
    std::ostringstream msg;
    msg << "time " << t << " is not a whole number of propagator steps ("
        << prop_.dt() << ") after " << t0_;
    throw ValidationError(msg.str());
  }
  const auto step = static_cast<std::size_t>(r);
  if (cached_ && step == cached_step_) return cached_;
  if (step < prop_.steps_taken()) {
    throw ValidationError("propagated source cannot go back in time");
  }
  prop_.step(step - prop_.steps_taken());
  cached_ = std::make_shared<const VelocityField>(prop_.state());
  cached_step_ = step;
  return cached_;
}

void require_half_step_multiple(double dt, double dt_traj) {
  const double ratio = 0.5 * dt_traj / dt;
  const double r = std::nearbyint(ratio);
  if (!(dt > 0.0) || !(dt_traj > 0.0) || r < 1.0 ||
      std::abs(ratio - r) > 1e-9 * std::max(1.0, ratio)) {
    std::ostringstream msg;
    msg << "propagator step dt_time = " << dt
        << " does not divide half the trajectory step (dt_traj_time = " << dt_traj << ")";
    throw ValidationError(msg.str());
  }
}

std::string to_string(TrajectoryStatus s) {
  switch (s) {
    case TrajectoryStatus::completed:
      return "completed";
    case TrajectoryStatus::aborted_node:
      return "aborted(node)";
    case TrajectoryStatus::aborted_boundary:
      return "aborted(boundary)";
  }
  return "unknown";
}

std::size_t TrajectoryEnsemble::aborted() const {
  std::size_t n = 0;
  for (TrajectoryStatus s : status) n += s != TrajectoryStatus::completed;
  return n;
}

Trajectory TrajectoryEnsemble::trajectory(std::size_t i) const {
  Trajectory out;
  out.status = status.at(i);
  if (paths.empty()) {
    out.times.push_back(times.back());
    out.states.push_back(Configuration{
        std::vector<double>(final_positions.begin() + i * ndim,
                            final_positions.begin() + (i + 1) * ndim),
        times.back()});
    return out;
  }
  const std::vector<double>& path = paths.at(i);
  const std::size_t steps = path.size() / ndim;
  for (std::size_t j = 0; j < steps; ++j) {
    out.times.push_back(times[j]);
    out.states.push_back(Configuration{
        std::vector<double>(path.begin() + j * ndim, path.begin() + (j + 1) * ndim),
        times[j]});
  }
  return out;
}

TrajectoryEnsemble integrate_ensemble(WaveSource& source,
                                      std::span<const double> initial_positions,
                                      std::size_t ndim, double t0, double t1,
                                      double h, const IntegrationOptions& options) {
  if (ndim == 0 || ndim > kMaxDims || initial_positions.size() % ndim != 0) {
    throw ValidationError("initial positions do not match the dimension");
  }
  if (!(h > 0.0) || !(t1 >= t0)) {
    throw ValidationError("integration needs h > 0 and t1 >= t0");
  }
  const double span = t1 - t0;
  const double steps_real = span / h;
  const double steps_round = std::nearbyint(steps_real);
  if (std::abs(steps_real - steps_round) > 1e-9 * std::max(1.0, steps_real)) {
    std::ostringstream msg;
    msg << "interval " << span << " is not a whole number of steps " << h;
    throw ValidationError(msg.str());
  }
  const auto nsteps = static_cast<std::size_t>(steps_round);
  const std::size_t n = initial_positions.size() / ndim;

  TrajectoryEnsemble ens;
  ens.ndim = ndim;
  ens.final_positions.assign(initial_positions.begin(), initial_positions.end());
  ens.status.assign(n, TrajectoryStatus::completed);
  ens.times.reserve(nsteps + 1);
  for (std::size_t i = 0; i <= nsteps; ++i) {
    ens.times.push_back(t0 + static_cast<double>(i) * h);
  }
  if (options.record) {
    ens.paths.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      ens.paths[i].reserve((nsteps + 1) * ndim);
      ens.paths[i].assign(initial_positions.begin() + i * ndim,
                          initial_positions.begin() + (i + 1) * ndim);
    }
  }

  std::shared_ptr<const VelocityField> f0 = source.field_at(t0);
  if (f0->grid().ndim() != ndim) {
    throw ValidationError("wave source dimension does not match the positions");
  }
  const GridSpec grid = f0->grid();
  if (options.on_step) options.on_step(t0, *f0, ens.final_positions, ens.status);

  const double scale = options.velocity_scale;
  for (std::size_t step = 0; step < nsteps; ++step) {
    const double t = ens.times[step];
    std::shared_ptr<const VelocityField> fh = source.field_at(t + 0.5 * h);
    std::shared_ptr<const VelocityField> f1 = source.field_at(ens.times[step + 1]);

    detail::parallel_for(n, options.threads, [&](std::size_t begin, std::size_t end) {
      std::array<double, kMaxDims> q{};
      std::array<double, kMaxDims> stage{};
      std::array<std::array<double, kMaxDims>, 4> k{};
      const std::span<double> qs(stage.data(), ndim);
      auto eval = [&](const VelocityField& f, std::span<double> out) {
        if (!grid.inside_margin(qs, 1.0)) return TrajectoryStatus::aborted_boundary;
        switch (f.eval(qs, out)) {
          case VelocityField::Status::ok:
            for (double& x : out) x *= scale;
            return TrajectoryStatus::completed;
          case VelocityField::Status::node:
            return TrajectoryStatus::aborted_node;
          case VelocityField::Status::outside:
            break;
        }
        return TrajectoryStatus::aborted_boundary;
      };
      for (std::size_t i = begin; i < end; ++i) {
        if (ens.status[i] != TrajectoryStatus::completed) continue;
        double* pos = &ens.final_positions[i * ndim];
        std::copy(pos, pos + ndim, q.begin());
        const VelocityField* fields[4] = {f0.get(), fh.get(), fh.get(), f1.get()};
        const double coef[4] = {0.0, 0.5 * h, 0.5 * h, h};
        TrajectoryStatus st = TrajectoryStatus::completed;
        for (int s = 0; s < 4 && st == TrajectoryStatus::completed; ++s) {
          for (std::size_t d = 0; d < ndim; ++d) {
            stage[d] = s == 0 ? q[d] : q[d] + coef[s] * k[s - 1][d];
          }
          st = eval(*fields[s], std::span(k[s].data(), ndim));
        }
        if (st == TrajectoryStatus::completed) {
          for (std::size_t d = 0; d < ndim; ++d) {
            stage[d] = q[d] + h / 6.0 * (k[0][d] + 2.0 * k[1][d] + 2.0 * k[2][d] + k[3][d]);
          }
          if (!grid.inside_margin(qs, 1.0)) st = TrajectoryStatus::aborted_boundary;
        }
        if (st != TrajectoryStatus::completed) {
          ens.status[i] = st;
          continue;
        }
        std::copy(stage.begin(), stage.begin() + ndim, pos);
        if (options.record) {
          ens.paths[i].insert(ens.paths[i].end(), stage.begin(), stage.begin() + ndim);
        }
      }
    });
    if (options.on_step) {
      options.on_step(ens.times[step + 1], *f1, ens.final_positions, ens.status);
    }
    f0 = std::move(f1);
  }
  return ens;
}

Trajectory integrate_trajectory(WaveSource& source, const Configuration& q0,
                                double t0, double t1, double h) {
  const TrajectoryEnsemble ens =
      integrate_ensemble(source, q0.coords, q0.coords.size(), t0, t1, h);
  return ens.trajectory(0);
}

VelocityConsistency subsystem_velocity_consistency(const WaveFunction& psi,
                                                   const SubsystemSplit& split,
                                                   std::span<const double> q) {
  split.validate(psi.grid().ndim());
  return subsystem_velocity_consistency(VelocityField(psi), split, q);
}

VelocityConsistency subsystem_velocity_consistency(const VelocityField& joint,
                                                   const SubsystemSplit& split,
                                                   std::span<const double> q) {
  const WaveFunction& psi = joint.wave();
  split.validate(psi.grid().ndim());
  if (q.size() != psi.grid().ndim()) {
    throw ValidationError("configuration does not match the grid dimension");
  }
  const std::vector<double> joint_all = joint(q);
  std::vector<double> x;
  std::vector<double> y;
  VelocityConsistency out;
  for (std::size_t d : split.x_dims) {
    x.push_back(q[d]);
    out.joint.push_back(joint_all[d]);
  }
  for (std::size_t d : split.y_dims) y.push_back(q[d]);

  const ConditionalSlice slice = conditional_wf(psi, split, y);
  if (!slice.normalizable) {
    throw NodeError("conditional wave function vanishes at this environment point");
  }
  out.conditional = VelocityField(slice.raw)(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.deviation = std::max(out.deviation, std::abs(out.joint[i] - out.conditional[i]));
  }
  return out;
}

}  // namespace bohm
