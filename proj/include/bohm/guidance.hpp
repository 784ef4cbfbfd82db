#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bohm/evolve.hpp"
#include "bohm/fields.hpp"

namespace bohm {

// The guiding field v_k = (1/m_k) Im(psi^dagger d_k psi / psi^dagger psi),
// with spinor inner products over the components. Gradients are computed
// spectrally on the grid once; psi and its gradient are then interpolated
// multilinearly at the query point. The global factor of the source wave
// function never enters, so c * psi yields bit-identical velocities.
class VelocityField {
 public:
  // Evaluation is refused below kDensityFloor * (mean grid density).
  static constexpr double kDensityFloor = 1e-12;

  enum class Status { ok, node, outside };

  explicit VelocityField(std::shared_ptr<const WaveFunction> wf,
                         std::vector<double> axis_masses = {});
  explicit VelocityField(const WaveFunction& wf,
                         std::vector<double> axis_masses = {});

  // Hot path; writes ndim velocities into v.
  Status eval(std::span<const double> q, std::span<double> v) const noexcept;
  // Throws NodeError / DomainError instead of returning a status.
  std::vector<double> operator()(std::span<const double> q) const;

  // psi^dagger psi and Im(psi^dagger d_k psi) at q (factor excluded).
  Status density_and_current(std::span<const double> q, double& density,
                             std::span<double> current) const noexcept;

  const WaveFunction& wave() const { return *wf_; }
  const GridSpec& grid() const { return wf_->grid(); }
  double time() const { return wf_->time(); }
  double density_floor() const { return floor_; }

 private:
  std::shared_ptr<const WaveFunction> wf_;
  std::size_t ndim_;
  std::size_t spin_;
  std::size_t per_node_;
  // Per node: spin values of psi followed by ndim blocks of spin gradients.
  std::vector<cplx> table_;
  std::vector<double> inv_mass_;
  double floor_;
};

std::vector<double> velocity(const WaveFunction& wf, std::span<const double> q,
                             std::span<const double> axis_masses = {});
inline std::vector<double> velocity(const WaveFunction& wf,
                                    const Configuration& q) {
  return velocity(wf, q.coords);
}

// Supplies guiding fields at the times the integrator asks for. Requests
// arrive in non-decreasing time order.
class WaveSource {
 public:
  virtual ~WaveSource() = default;
  virtual std::shared_ptr<const VelocityField> field_at(double t) = 0;
};

// Time-independent field, e.g. an energy eigenstate (its phase rotation does
// not affect velocities).
class StationarySource : public WaveSource {
 public:
  explicit StationarySource(const WaveFunction& wf);
  std::shared_ptr<const VelocityField> field_at(double t) override;

 private:
  std::shared_ptr<const VelocityField> field_;
};

// Runs a split-step propagator in lockstep with the integrator. Every
// requested time must be a whole number of propagator steps after the start.
class PropagatedSource : public WaveSource {
 public:
  PropagatedSource(const WaveFunction& initial, const HamiltonianSpec& h,
                   double dt);
  std::shared_ptr<const VelocityField> field_at(double t) override;

  const Propagator& propagator() const { return prop_; }

 private:
  Propagator prop_;
  double t0_;
  std::size_t cached_step_ = 0;
  std::shared_ptr<const VelocityField> cached_;
};

// RK4 midpoints must land on propagator steps: throws ValidationError naming
// both values unless dt divides dt_traj / 2.
void require_half_step_multiple(double dt, double dt_traj);

enum class TrajectoryStatus { completed, aborted_node, aborted_boundary };
std::string to_string(TrajectoryStatus s);

struct Trajectory {
  std::vector<double> times;
  std::vector<Configuration> states;
  TrajectoryStatus status = TrajectoryStatus::completed;
};

// Many trajectories integrated on a shared time grid.
struct TrajectoryEnsemble {
  std::size_t ndim = 0;
  std::vector<double> times;
  // Row-major n x ndim; the last valid position for aborted trajectories.
  std::vector<double> final_positions;
  std::vector<TrajectoryStatus> status;
  // When recorded: paths[i] is steps_completed x ndim, starting at q0.
  std::vector<std::vector<double>> paths;

  std::size_t size() const { return status.size(); }
  std::size_t aborted() const;
  Trajectory trajectory(std::size_t i) const;
};

struct IntegrationOptions {
  bool record = true;
  // Multiplies every velocity; 1 except in deliberately corrupted controls.
  double velocity_scale = 1.0;
  std::size_t threads = 1;
  // Called at t0 and after every completed step with the field at that time
  // and the current positions.
  std::function<void(double t, const VelocityField& field,
                     std::span<const double> positions,
                     std::span<const TrajectoryStatus> status)>
      on_step;
};

// Classical RK4 on dQ/dt = v(Q, t) with the field sampled at t, t + h/2 and
// t + h. A trajectory aborts with aborted_node when the density floor is hit
// and aborted_boundary when a stage point comes within one grid cell of the
// box edge. (t1 - t0) must be a whole number of steps h.
TrajectoryEnsemble integrate_ensemble(WaveSource& source,
                                      std::span<const double> initial_positions,
                                      std::size_t ndim, double t0, double t1,
                                      double h, const IntegrationOptions& options = {});

Trajectory integrate_trajectory(WaveSource& source, const Configuration& q0,
                                double t0, double t1, double h);

struct SubsystemSplit;

struct VelocityConsistency {
  std::vector<double> joint;        // x components of v^Psi(X, Y)
  std::vector<double> conditional;  // v^psi(X), psi = Psi(., Y)
  double deviation = 0.0;           // max-norm difference
};

// Throws NodeError when either field is evaluated below its density floor.
VelocityConsistency subsystem_velocity_consistency(const WaveFunction& psi,
                                                   const SubsystemSplit& split,
                                                   std::span<const double> q);
// Same, reusing an already built joint field.
VelocityConsistency subsystem_velocity_consistency(const VelocityField& joint,
                                                   const SubsystemSplit& split,
                                                   std::span<const double> q);

}  // namespace bohm
