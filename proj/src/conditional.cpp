#include "bohm/conditional.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>
#include <sstream>

#include "bohm/equilibrium.hpp"
#include "bohm/error.hpp"
#include "parallel.hpp"
#include "stencil.hpp"

namespace bohm {

SubsystemSplit SubsystemSplit::leading(std::size_t ndim, std::size_t nx) {
  SubsystemSplit s;
  for (std::size_t d = 0; d < ndim; ++d) (d < nx ? s.x_dims : s.y_dims).push_back(d);
  s.validate(ndim);
  return s;
}

void SubsystemSplit::validate(std::size_t ndim) const {
  if (x_dims.empty() || y_dims.empty()) {
    throw ValidationError("subsystem and environment both need at least one axis");
  }
  std::vector<int> seen(ndim, 0);
  for (const auto* dims : {&x_dims, &y_dims}) {
    for (std::size_t d : *dims) {
      if (d >= ndim) throw ValidationError("split axis " + std::to_string(d) + " out of range");
      if (seen[d]++) throw ValidationError("split axis " + std::to_string(d) + " listed twice");
    }
  }
  if (x_dims.size() + y_dims.size() != ndim) {
    throw ValidationError("split must cover every grid axis");
  }
}

ConditionalSlice conditional_wf(const WaveFunction& psi, const SubsystemSplit& split,
                                std::span<const double> environment) {
  const GridSpec& grid = psi.grid();
  split.validate(grid.ndim());
  if (environment.size() != split.y_dims.size()) {
    throw ValidationError("environment point has the wrong number of coordinates");
  }
  detail::Stencil st;
  if (!detail::make_stencil(grid, split.y_dims, environment, st)) {
    throw DomainError("environment point outside the grid domain");
  }
  GridSpec xgrid = grid.sub_grid(split.x_dims);
  const std::size_t spin = psi.spin();
  const auto raw = psi.raw();
  std::vector<cplx> amps(xgrid.size() * spin);
  std::vector<std::size_t> idx(xgrid.ndim());
  for (std::size_t xi = 0; xi < xgrid.size(); ++xi) {
    xgrid.unravel(xi, idx);
    std::size_t base = 0;
    for (std::size_t j = 0; j < idx.size(); ++j) base += idx[j] * grid.stride(split.x_dims[j]);
    for (std::size_t s = 0; s < spin; ++s) {
      cplx v = 0.0;
      for (std::size_t c = 0; c < st.count; ++c) {
        v += st.weight[c] * raw[(base + st.offset[c]) * spin + s];
      }
      amps[xi * spin + s] = v;
    }
  }
  ConditionalSlice out{WaveFunction(std::move(xgrid), spin, std::move(amps), psi.time(),
                                    psi.factor()),
                       std::nullopt,
                       std::vector<double>(environment.begin(), environment.end()),
                       psi.time(), false};
  const double floor = VelocityField::kDensityFloor * psi.raw_mean_density();
  out.normalizable = out.raw.raw_mean_density() > floor;
  if (out.normalizable) out.normalized = out.raw.normalized();
  return out;
}

double fidelity(const WaveFunction& a, const WaveFunction& b) {
  if (!(a.grid() == b.grid()) || a.spin() != b.spin()) {
    throw ValidationError("fidelity needs matching grids and spin counts");
  }
  const auto ra = a.raw();
  const auto rb = b.raw();
  cplx ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ab += std::conj(ra[i]) * rb[i];
    aa += std::norm(ra[i]);
    bb += std::norm(rb[i]);
  }
  if (!(aa > 0.0 && bb > 0.0)) throw NumericalError("fidelity of a zero wave function");
  return std::min(1.0, std::abs(ab) / std::sqrt(aa * bb));
}

// Computed from the aligned difference itself: sqrt(2 - 2F) loses every
// digit below ~1e-8 to cancellation.
double ray_distance(const WaveFunction& a, const WaveFunction& b) {
  if (!(a.grid() == b.grid()) || a.spin() != b.spin()) {
    throw ValidationError("ray distance needs matching grids and spin counts");
  }
  const auto ra = a.raw();
  const auto rb = b.raw();
  cplx ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ab += std::conj(ra[i]) * rb[i];
    aa += std::norm(ra[i]);
    bb += std::norm(rb[i]);
  }
  if (!(aa > 0.0 && bb > 0.0)) throw NumericalError("ray distance of a zero wave function");
  const cplx align = std::abs(ab) > 0.0 ? std::conj(ab) / std::abs(ab) : cplx(1.0);
  const double sa = 1.0 / std::sqrt(aa);
  const double sb = 1.0 / std::sqrt(bb);
  double d2 = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    d2 += std::norm(ra[i] * sa - align * rb[i] * sb);
  }
  return std::sqrt(d2);
}

namespace {

std::size_t whole_steps(double span, double dt) {
  const double r = std::nearbyint(span / dt);
  if (std::abs(span / dt - r) > 1e-6 || r < 0.0) {
    std::ostringstream msg;
    msg << "time " << span << " is not a whole number of steps " << dt;
    throw ValidationError(msg.str());
  }
  return static_cast<std::size_t>(r);
}

// Advances a propagator to the step matching time t.
void advance_to(Propagator& p, double t0, double t) {
  const std::size_t n = whole_steps(t - t0, p.dt());
  if (n < p.steps_taken()) throw ValidationError("reference propagator cannot go back");
  p.step(n - p.steps_taken());
}

void collect(std::vector<std::string>& into, const std::vector<std::string>& from) {
  for (const std::string& w : from) {
    if (std::find(into.begin(), into.end(), w) == into.end()) into.push_back(w);
  }
}

double mean_coordinate(const WaveFunction& wf, std::size_t dim) {
  const std::vector<double> rho = node_densities(wf);
  const GridSpec& g = wf.grid();
  double m = 0.0;
  double w = 0.0;
  for (std::size_t p = 0; p < rho.size(); ++p) {
    m += rho[p] * g.axis(dim).node((p / g.stride(dim)) % g.axis(dim).npoints);
    w += rho[p];
  }
  return m / w;
}

}  // namespace

BranchStats collapse_experiment(const CollapseSetup& setup) {
  const GridSpec& sys = setup.branch1.grid();
  if (!(setup.branch2.grid() == sys) || setup.branch1.spin() != 1 ||
      setup.branch2.spin() != 1 || setup.pointer.spin() != 1) {
    throw ValidationError("branches must be scalar states on one system grid");
  }
  if (setup.pointer.grid().ndim() != 1) throw ValidationError("pointer grid must be 1D");
  if (setup.trials == 0) throw ValidationError("collapse needs at least one trial");
  if (setup.kick_increments == 0) throw ValidationError("kick needs at least one increment");
  if (!(setup.pointer_width > 0.0)) throw ValidationError("pointer width must be positive");
  const double w1 = std::norm(setup.c1);
  const double w2 = std::norm(setup.c2);
  if (!(w1 + w2 > 0.0)) throw ValidationError("branch amplitudes are both zero");
  require_half_step_multiple(setup.dt, setup.dt_traj);

  const std::size_t nx = sys.ndim();
  const std::size_t ndim = nx + 1;
  const std::size_t pax = nx;
  const PointerCoupling A = setup.coupling
                                ? setup.coupling
                                : PointerCoupling([](std::span<const double> q) {
                                    return q[0] > 0.0 ? 1.0 : (q[0] < 0.0 ? -1.0 : 0.0);
                                  });
  const SubsystemSplit split = SubsystemSplit::leading(ndim, nx);

  const WaveFunction phi1 = setup.branch1.normalized().materialized();
  const WaveFunction phi2 = setup.branch2.normalized().materialized();
  const WaveFunction chi = setup.pointer.normalized().materialized();
  const double y_center = mean_coordinate(chi, 0);

  // Mean pointer displacement per unit shift for each branch.
  std::array<double, 2> a{};
  for (int b = 0; b < 2; ++b) {
    const std::vector<double> rho = node_densities(b == 0 ? phi1 : phi2);
    double s = 0.0;
    double m = 0.0;
    for (std::size_t p = 0; p < rho.size(); ++p) {
      std::vector<double> q = sys.node_coords(p);
      q.push_back(y_center);
      s += rho[p] * A(q);
      m += rho[p];
    }
    a[b] = s / m;
  }
  const double separation = std::abs(setup.shift * (a[0] - a[1]));
  if (w1 > 0.0 && w2 > 0.0 &&
      (a[0] * a[1] >= 0.0 || separation < setup.separation_widths * setup.pointer_width)) {
    std::ostringstream msg;
    msg << "the coupling does not separate the branches: pointer shifts " << setup.shift * a[0]
        << " and " << setup.shift * a[1];
    throw ValidationError(msg.str());
  }
  const std::array<int, 2> direction{a[0] > 0.0 ? 1 : -1, a[1] > 0.0 ? 1 : -1};

  BranchStats stats;
  stats.trials = setup.trials;
  stats.born_weight = {w1 / (w1 + w2), w2 / (w1 + w2)};

  // Overlap of the two displaced pointer states.
  {
    const PointerCoupling one = [](std::span<const double>) { return 1.0; };
    const WaveFunction p1 = measurement_kick(chi, one, setup.shift * a[0], 1.0, 0);
    const WaveFunction p2 = measurement_kick(chi, one, setup.shift * a[1], 1.0, 0);
    stats.pointer_overlap = fidelity(p1, p2);
  }
  if (w1 > 0.0 && w2 > 0.0 && stats.pointer_overlap > setup.overlap_limit) {
    std::ostringstream msg;
    msg << "displaced pointer states overlap by " << stats.pointer_overlap << " (limit "
        << setup.overlap_limit << "); branch assignment would be inconclusive";
    throw NumericalError(msg.str());
  }

  std::vector<cplx> sys_amps(sys.size());
  for (std::size_t p = 0; p < sys.size(); ++p) {
    sys_amps[p] = setup.c1 * phi1.raw()[p] + setup.c2 * phi2.raw()[p];
  }
  const WaveFunction system(sys, 1, std::move(sys_amps), phi1.time());
  WaveFunction psi = tensor_product(system, chi).normalized().materialized();
  const double t0 = psi.time();

  const std::size_t n = setup.trials;
  std::vector<double> positions = sample(psi, n, setup.seed).coords;
  std::vector<TrajectoryStatus> status(n, TrajectoryStatus::completed);

  // fid[c][b * n + i]: fidelity of trial i with branch b at checkpoint c.
  std::vector<std::vector<double>> fid;
  std::vector<bool> separated;
  const std::size_t nconsistency = std::min(n, setup.consistency_trials);
  const double gap_needed = setup.separation_widths * setup.pointer_width;

  auto checkpoint = [&](const WaveFunction& joint, const VelocityField* field,
                        const WaveFunction& ref1, const WaveFunction& ref2,
                        std::span<const double> pos, std::span<const TrajectoryStatus> st,
                        double accumulated_shift) {
    std::vector<double> f(2 * n, 0.0);
    detail::parallel_for(n, setup.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        if (st[i] != TrajectoryStatus::completed) continue;
        const std::span<const double> y(&pos[i * ndim + pax], 1);
        const Axis& yax = joint.grid().axis(pax);
        if (!(y[0] > yax.lower && y[0] < yax.upper)) continue;
        const ConditionalSlice slice = conditional_wf(joint, split, y);
        if (!slice.normalizable) continue;
        f[i] = fidelity(*slice.normalized, ref1);
        f[n + i] = fidelity(*slice.normalized, ref2);
      }
    });
    fid.push_back(std::move(f));
    separated.push_back(std::abs(accumulated_shift * (a[0] - a[1])) >= gap_needed);

    std::optional<VelocityField> own;
    const VelocityField& local = field ? *field : own.emplace(joint);
    for (std::size_t i = 0; i < nconsistency; ++i) {
      if (st[i] != TrajectoryStatus::completed) continue;
      const std::span<const double> q(&pos[i * ndim], ndim);
      try {
        stats.max_velocity_deviation = std::max(
            stats.max_velocity_deviation,
            subsystem_velocity_consistency(local, split, q).deviation);
      } catch (const DomainError&) {
        // Node of either field: no velocity to compare.
      }
    }
  };

  // Impulsive kick, applied in increments that carry the configurations along.
  const double dshift = setup.shift / static_cast<double>(setup.kick_increments);
  checkpoint(psi, nullptr, phi1, phi2, positions, status, 0.0);
  for (std::size_t k = 1; k <= setup.kick_increments; ++k) {
    psi = measurement_kick(psi, A, dshift, 1.0, pax);
    for (std::size_t i = 0; i < n; ++i) {
      if (status[i] != TrajectoryStatus::completed) continue;
      const std::span<double> q(&positions[i * ndim], ndim);
      q[pax] += dshift * A(q);
      if (!psi.grid().inside_margin(q, 1.0)) status[i] = TrajectoryStatus::aborted_boundary;
    }
    checkpoint(psi, nullptr, phi1, phi2, positions, status,
               dshift * static_cast<double>(k));
  }

  // Free evolution after the kick, with the system references evolved in 1D.
  const HamiltonianSpec free_h;
  Propagator ref1(phi1, free_h, setup.dt);
  Propagator ref2(phi2, free_h, setup.dt);
  PropagatedSource source(psi, free_h, setup.dt);
  IntegrationOptions io;
  io.record = false;
  io.threads = setup.threads;
  bool first = true;
  io.on_step = [&](double t, const VelocityField& field, std::span<const double> pos,
                   std::span<const TrajectoryStatus> st) {
    if (first) {  // identical to the last kick checkpoint
      first = false;
      return;
    }
    advance_to(ref1, t0, t);
    advance_to(ref2, t0, t);
    std::vector<TrajectoryStatus> merged(st.begin(), st.end());
    for (std::size_t i = 0; i < n; ++i) {
      if (status[i] != TrajectoryStatus::completed) merged[i] = status[i];
    }
    checkpoint(field.wave(), &field, ref1.state(), ref2.state(), pos, merged, setup.shift);
  };
  const TrajectoryEnsemble ens =
      integrate_ensemble(source, positions, ndim, t0, t0 + setup.settle_time, setup.dt_traj, io);
  for (std::size_t i = 0; i < n; ++i) {
    if (status[i] == TrajectoryStatus::completed) status[i] = ens.status[i];
  }
  collect(stats.warnings, source.propagator().warnings());
  collect(stats.warnings, ref1.warnings());
  stats.checkpoints = fid.size();

  // Classification by the final pointer position.
  const std::vector<double>& final_pos = ens.final_positions;
  const std::vector<double>& last = fid.back();
  double sum_all = 0.0;
  std::array<double, 2> sum{};
  stats.log.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    CollapseTrial trial;
    trial.trial = i;
    trial.pointer = final_pos[i * ndim + pax];
    const double dy = trial.pointer - y_center;
    if (status[i] != TrajectoryStatus::completed) {
      ++stats.aborted;
    } else if (std::abs(dy) <= setup.guard_widths * setup.pointer_width) {
      ++stats.ambiguous;
    } else {
      const int sign = dy > 0.0 ? 1 : -1;
      const int b = direction[0] == sign ? 0 : (direction[1] == sign ? 1 : -1);
      if (b < 0) {
        ++stats.ambiguous;
      } else {
        trial.branch = b + 1;
        trial.fidelity = last[b * n + i];
        ++stats.counts[b];
        sum[b] += trial.fidelity;
        sum_all += trial.fidelity;
        stats.min_fidelity = std::min(stats.min_fidelity, trial.fidelity);
        double prev = -1.0;
        for (std::size_t c = 0; c < fid.size(); ++c) {
          if (!separated[c]) continue;
          const double cur = fid[c][b * n + i];
          if (prev >= 0.0) stats.permanence_drop = std::max(stats.permanence_drop, prev - cur);
          prev = cur;
        }
      }
    }
    stats.log.push_back(trial);
  }
  const std::size_t assigned = stats.counts[0] + stats.counts[1];
  if (assigned > 0) {
    stats.frequency1 = static_cast<double>(stats.counts[0]) / static_cast<double>(assigned);
    stats.sigma1 = std::sqrt(stats.born_weight[0] * stats.born_weight[1] /
                             static_cast<double>(assigned));
    stats.mean_fidelity_all = sum_all / static_cast<double>(assigned);
  } else {
    stats.min_fidelity = 0.0;
  }
  for (int b = 0; b < 2; ++b) {
    if (stats.counts[b] > 0) stats.mean_fidelity[b] = sum[b] / static_cast<double>(stats.counts[b]);
  }
  stats.permanent = stats.permanence_drop <= setup.permanence_slack;
  return stats;
}

DecouplingReport decoupling_experiment(const DecouplingSetup& setup) {
  if (setup.system.spin() != 1 || setup.environment.spin() != 1) {
    throw ValidationError("decoupling needs scalar states");
  }
  if (!(setup.duration >= 0.0)) throw ValidationError("duration must be >= 0");
  require_half_step_multiple(setup.dt, setup.dt_traj);
  const GridSpec gx = setup.system.grid();
  const GridSpec gy = setup.environment.grid();
  setup.system_h.axis_masses(gx);
  setup.environment_h.axis_masses(gy);
  const std::size_t nx = gx.ndim();
  const std::size_t ny = gy.ndim();

  const WaveFunction phi0 = setup.system.normalized().materialized();
  const WaveFunction chi0 = setup.environment.normalized().materialized();
  const WaveFunction psi0 = tensor_product(phi0, chi0);
  const std::size_t ndim = psi0.grid().ndim();
  const SubsystemSplit split = SubsystemSplit::leading(ndim, nx);

  const double g = setup.coupling;
  HamiltonianSpec joint_h(
      [hx = setup.system_h, hy = setup.environment_h, gx, gy, nx, ny, g](
          std::span<const double> q) {
        double v = hx.potential_at(gx, q.first(nx)) + hy.potential_at(gy, q.subspan(nx, ny));
        if (g != 0.0) v += g * q[0] * q[nx];
        return v;
      });

  DecouplingReport rep;
  if (setup.q0) {
    if (setup.q0->size() != ndim) throw ValidationError("q0 has the wrong dimension");
    rep.q0 = *setup.q0;
  } else {
    rep.q0 = sample(psi0, 1, setup.seed).coords;
  }

  const double t0 = psi0.time();
  Propagator sub(phi0, setup.system_h, setup.dt);
  PropagatedSource source(psi0, joint_h, setup.dt);
  IntegrationOptions io;
  io.record = false;
  io.on_step = [&](double t, const VelocityField& field, std::span<const double> pos,
                   std::span<const TrajectoryStatus> st) {
    if (st[0] != TrajectoryStatus::completed) return;
    advance_to(sub, t0, t);
    const std::span<const double> y = pos.subspan(nx, ny);
    const ConditionalSlice slice = conditional_wf(field.wave(), split, y);
    if (!slice.normalizable) {
      throw NumericalError("conditional wave function vanished along the trajectory");
    }
    const double dev = ray_distance(*slice.normalized, sub.state());
    rep.times.push_back(t);
    rep.deviations.push_back(dev);
    rep.environment.insert(rep.environment.end(), y.begin(), y.end());
    rep.max_deviation = std::max(rep.max_deviation, dev);
    rep.max_velocity_deviation = std::max(
        rep.max_velocity_deviation, subsystem_velocity_consistency(field, split, pos).deviation);
  };
  const TrajectoryEnsemble ens =
      integrate_ensemble(source, rep.q0, ndim, t0, t0 + setup.duration, setup.dt_traj, io);
  if (ens.status[0] != TrajectoryStatus::completed) {
    throw NumericalError("environment trajectory " + to_string(ens.status[0]) + " at t = " +
                         std::to_string(rep.times.empty() ? t0 : rep.times.back()));
  }
  return rep;
}

TimelessReport timeless_experiment(const TimelessSetup& setup) {
  const WaveFunction psi0 = setup.universe.normalized().materialized();
  const GridSpec& grid = psi0.grid();
  const std::size_t ndim = grid.ndim();
  setup.split.validate(ndim);
  if (!(setup.duration >= 0.0)) throw ValidationError("duration must be >= 0");
  require_half_step_multiple(setup.dt, setup.dt_traj);

  TimelessReport rep;
  const VelocityField field0(psi0);
  auto usable = [&](std::span<const double> q) {
    std::array<double, kMaxDims> v{};
    return grid.inside_margin(q, 1.0) &&
           field0.eval(q, std::span(v.data(), ndim)) == VelocityField::Status::ok;
  };
  if (setup.q0) {
    if (setup.q0->size() != ndim) throw ValidationError("q0 has the wrong dimension");
    if (!usable(*setup.q0)) throw NodeError("q0 sits on a node of the universal state");
    rep.q0 = *setup.q0;
  } else {
    const SampleSet draws = sample(psi0, setup.max_resamples + 1, setup.seed);
    bool found = false;
    for (std::size_t i = 0; i < draws.size() && !found; ++i) {
      const Configuration q = draws.at(i);
      if (usable(q.coords)) {
        rep.q0 = q.coords;
        found = true;
      } else {
        ++rep.resamples;
      }
    }
    if (!found) throw NumericalError("no usable initial configuration after resampling");
  }

  std::vector<double> center(ndim, 0.0);
  if (setup.h.trap() && setup.h.trap()->center.size() == ndim) center = setup.h.trap()->center;
  auto angle = [&](std::span<const double> q) {
    return ndim >= 2 ? std::atan2(q[1] - center[1], q[0] - center[0]) : 0.0;
  };
  const std::vector<double> rho0 = node_densities(psi0);
  std::vector<double> y0;
  for (std::size_t d : setup.split.y_dims) y0.push_back(rep.q0[d]);
  const ConditionalSlice slice0 = conditional_wf(psi0, setup.split, y0);
  if (!slice0.normalizable) throw NodeError("initial conditional wave function vanishes");

  const double t0 = psi0.time();
  double last_angle = angle(rep.q0);
  PropagatedSource source(psi0, setup.h, setup.dt);
  IntegrationOptions io;
  io.record = false;
  io.on_step = [&](double t, const VelocityField& field, std::span<const double> pos,
                   std::span<const TrajectoryStatus> st) {
    if (st[0] != TrajectoryStatus::completed) return;
    const WaveFunction& psi = field.wave();
    rep.stationarity_defect = std::max(rep.stationarity_defect, 1.0 - fidelity(psi, psi0));
    const std::vector<double> rho = node_densities(psi);
    for (std::size_t p = 0; p < rho.size(); ++p) {
      rep.max_density_drift = std::max(rep.max_density_drift, std::abs(rho[p] - rho0[p]));
    }
    double disp2 = 0.0;
    for (std::size_t d = 0; d < ndim; ++d) disp2 += (pos[d] - rep.q0[d]) * (pos[d] - rep.q0[d]);
    rep.max_displacement = std::max(rep.max_displacement, std::sqrt(disp2));
    const double ang = angle(pos);
    double step = ang - last_angle;
    if (step > std::numbers::pi) step -= 2.0 * std::numbers::pi;
    if (step < -std::numbers::pi) step += 2.0 * std::numbers::pi;
    rep.winding += step;
    last_angle = ang;

    std::vector<double> y;
    for (std::size_t d : setup.split.y_dims) y.push_back(pos[d]);
    const ConditionalSlice slice = conditional_wf(psi, setup.split, y);
    if (!slice.normalizable) throw NodeError("conditional wave function vanished");
    rep.max_ray_change =
        std::max(rep.max_ray_change, ray_distance(*slice.normalized, *slice0.normalized));
    rep.max_velocity_deviation =
        std::max(rep.max_velocity_deviation,
                 subsystem_velocity_consistency(field, setup.split, pos).deviation);
    rep.times.push_back(t);
    rep.path.insert(rep.path.end(), pos.begin(), pos.end());
  };
  const TrajectoryEnsemble ens =
      integrate_ensemble(source, rep.q0, ndim, t0, t0 + setup.duration, setup.dt_traj, io);
  if (ens.status[0] != TrajectoryStatus::completed) {
    throw NumericalError("trajectory " + to_string(ens.status[0]) + " at t = " +
                         std::to_string(rep.times.back()));
  }
  rep.stationary = rep.stationarity_defect < setup.stationarity_tolerance &&
                   rep.max_density_drift < setup.stationarity_tolerance;
  rep.moves = rep.max_displacement > setup.displacement_threshold;
  rep.conditional_changes = rep.max_ray_change > setup.ray_change_threshold;
  return rep;
}

}  // namespace bohm
