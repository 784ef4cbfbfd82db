#pragma once

// Configuration-space grids and discrete (possibly spinor-valued) wave
// functions. All grids are periodic: node i of an axis sits at
// lower + i * (upper - lower) / npoints and the upper bound is identified with
// the lower one.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace bohm {

using cplx = std::complex<double>;

inline constexpr std::size_t kMaxDims = 6;

struct Axis {
  double lower = 0.0;
  double upper = 1.0;
  std::size_t npoints = 2;

  double extent() const { return upper - lower; }
  double spacing() const { return extent() / static_cast<double>(npoints); }
  double node(std::size_t i) const {
    return lower + static_cast<double>(i) * spacing();
  }

  bool operator==(const Axis&) const = default;
};

class GridSpec {
 public:
  static constexpr std::size_t kDefaultPointBudget = std::size_t{1} << 26;

  // particle_of_axis defaults to one particle per axis, masses to 1.
  explicit GridSpec(std::vector<Axis> axes,
                    std::vector<std::size_t> particle_of_axis = {},
                    std::vector<double> masses = {},
                    std::size_t point_budget = kDefaultPointBudget);

  static GridSpec line(double lower, double upper, std::size_t npoints,
                       double mass = 1.0);
  // Cartesian product; particles of b are renumbered after those of a.
  static GridSpec product(const GridSpec& a, const GridSpec& b);

  std::size_t ndim() const { return axes_.size(); }
  const std::vector<Axis>& axes() const { return axes_; }
  const Axis& axis(std::size_t k) const { return axes_.at(k); }
  std::size_t size() const { return size_; }
  std::size_t stride(std::size_t k) const { return strides_[k]; }
  double cell_volume() const { return cell_volume_; }

  std::size_t nparticles() const { return masses_.size(); }
  const std::vector<std::size_t>& particle_of_axis() const {
    return particle_of_axis_;
  }
  const std::vector<double>& masses() const { return masses_; }
  double axis_mass(std::size_t k) const {
    return masses_[particle_of_axis_[k]];
  }
  std::vector<double> axis_masses() const;

  // Row-major: the last axis varies fastest.
  void unravel(std::size_t flat, std::span<std::size_t> index) const;
  std::vector<double> node_coords(std::size_t flat) const;

  // lower < q_k < upper on every axis.
  bool contains(std::span<const double> q) const;
  // At least `cells` grid spacings away from every box edge.
  bool inside_margin(std::span<const double> q, double cells) const;

  // Grid over the listed axes only, in the given order. Particles that keep
  // at least one axis survive (renumbered), with their masses.
  GridSpec sub_grid(std::span<const std::size_t> dims) const;

  bool operator==(const GridSpec& other) const;

 private:
  std::vector<Axis> axes_;
  std::vector<std::size_t> particle_of_axis_;
  std::vector<double> masses_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 1;
  double cell_volume_ = 1.0;
};

// Discrete wave function: `spin` complex components per grid node, stored
// node-major (index = node * spin + s), times a global complex factor.
// Scaling by a constant only touches the factor, so quantities that are
// invariant under psi -> c psi (velocities, normalized slices) are computed
// from identical raw amplitudes and agree bit for bit.
class WaveFunction {
 public:
  WaveFunction(GridSpec grid, std::size_t spin, std::vector<cplx> amplitudes,
               double time = 0.0, cplx factor = 1.0);

  static WaveFunction zeros(GridSpec grid, std::size_t spin = 1,
                            double time = 0.0);

  const GridSpec& grid() const { return grid_; }
  std::size_t spin() const { return spin_; }
  double time() const { return time_; }
  cplx factor() const { return factor_; }

  // Amplitudes without the global factor.
  std::span<const cplx> raw() const { return amps_; }
  cplx at(std::size_t node, std::size_t s = 0) const {
    return factor_ * amps_[node * spin_ + s];
  }
  // Amplitudes with the global factor applied.
  std::vector<cplx> amplitudes() const;

  WaveFunction scaled(cplx c) const;
  WaveFunction normalized() const;
  WaveFunction with_time(double t) const;
  // Folds the factor into the amplitudes (factor becomes 1).
  WaveFunction materialized() const;

  // Sum over nodes and components of |raw|^2 times the cell volume.
  double raw_norm_squared() const;
  // Mean over nodes of sum_s |raw_s|^2; reference scale for density floors.
  double raw_mean_density() const;

 private:
  GridSpec grid_;
  std::size_t spin_;
  std::vector<cplx> amps_;
  double time_;
  cplx factor_;
};

struct Configuration {
  std::vector<double> coords;
  double time = 0.0;
};

// exp(i k.q - sum (q_i - c_i)^2 / (4 w_i^2)) times the spinor, normalized.
WaveFunction make_gaussian(const GridSpec& grid, std::span<const double> center,
                           std::span<const double> width,
                           std::span<const double> wavevector,
                           std::span<const cplx> spinor = {});

double norm(const WaveFunction& wf);
cplx inner(const WaveFunction& a, const WaveFunction& b);

// Multilinear interpolation of every spin component at q.
std::vector<cplx> evaluate(const WaveFunction& wf, std::span<const double> q);
inline std::vector<cplx> evaluate(const WaveFunction& wf,
                                  const Configuration& q) {
  return evaluate(wf, q.coords);
}

// psi_a(x) psi_b(y) on GridSpec::product(a.grid(), b.grid()); both scalar.
WaveFunction tensor_product(const WaveFunction& a, const WaveFunction& b);

// Pointwise sum_s |psi_s|^2 at the grid nodes, factor included.
std::vector<double> node_densities(const WaveFunction& wf);

// Largest fraction of the total mass found within `fraction` of the extent
// from any single box edge.
double edge_mass(const WaveFunction& wf, double fraction = 0.05);

// Grid wavenumbers of one axis in FFT order. With zero_nyquist the Nyquist
// mode of an even axis maps to 0 (derivatives); otherwise to -pi/dx.
std::vector<double> wavenumbers(const Axis& axis, bool zero_nyquist);

}  // namespace bohm
