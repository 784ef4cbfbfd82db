#include "bohm/fields.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "bohm/error.hpp"
#include "stencil.hpp"

namespace bohm {

GridSpec::GridSpec(std::vector<Axis> axes,
                   std::vector<std::size_t> particle_of_axis,
                   std::vector<double> masses, std::size_t point_budget)
    : axes_(std::move(axes)),
      particle_of_axis_(std::move(particle_of_axis)),
      masses_(std::move(masses)) {
  if (axes_.empty()) throw ValidationError("grid needs at least one axis");
  if (axes_.size() > kMaxDims) {
    throw ValidationError("grid has " + std::to_string(axes_.size()) +
                          " axes; at most " + std::to_string(kMaxDims) +
                          " are supported");
  }
  for (std::size_t k = 0; k < axes_.size(); ++k) {
    const Axis& ax = axes_[k];
    if (ax.npoints < 2) {
      throw ValidationError("axis " + std::to_string(k) +
                            " needs at least 2 points");
    }
    if (!(std::isfinite(ax.lower) && std::isfinite(ax.upper)) ||
        !(ax.upper > ax.lower)) {
      throw ValidationError("axis " + std::to_string(k) +
                            " needs finite bounds with upper > lower");
    }
  }

  if (particle_of_axis_.empty()) {
    particle_of_axis_.resize(axes_.size());
    for (std::size_t k = 0; k < axes_.size(); ++k) particle_of_axis_[k] = k;
  }
  if (particle_of_axis_.size() != axes_.size()) {
    throw ValidationError("particle map must list one particle per axis");
  }
  const std::size_t nparticles =
      *std::max_element(particle_of_axis_.begin(), particle_of_axis_.end()) + 1;
  std::vector<bool> used(nparticles, false);
  for (std::size_t p : particle_of_axis_) used[p] = true;
  if (std::find(used.begin(), used.end(), false) != used.end()) {
    throw ValidationError("every particle needs at least one axis");
  }
  if (masses_.empty()) masses_.assign(nparticles, 1.0);
  if (masses_.size() != nparticles) {
    throw ValidationError("expected " + std::to_string(nparticles) +
                          " masses, got " + std::to_string(masses_.size()));
  }
  for (double m : masses_) {
    if (!(std::isfinite(m) && m > 0.0)) {
      throw ValidationError("masses must be positive and finite");
    }
  }

  strides_.assign(axes_.size(), 1);
  double size = 1.0;
  for (std::size_t k = axes_.size(); k-- > 0;) {
    strides_[k] = size_;
    size *= static_cast<double>(axes_[k].npoints);
    if (size > static_cast<double>(point_budget)) {
      throw ValidationError("grid exceeds the point budget of " +
                            std::to_string(point_budget));
    }
    size_ *= axes_[k].npoints;
    cell_volume_ *= axes_[k].spacing();
  }
}

GridSpec GridSpec::line(double lower, double upper, std::size_t npoints,
                        double mass) {
  return GridSpec({Axis{lower, upper, npoints}}, {0}, {mass});
}

GridSpec GridSpec::product(const GridSpec& a, const GridSpec& b) {
  std::vector<Axis> axes = a.axes_;
  axes.insert(axes.end(), b.axes_.begin(), b.axes_.end());
  std::vector<std::size_t> pmap = a.particle_of_axis_;
  for (std::size_t p : b.particle_of_axis_) pmap.push_back(p + a.nparticles());
  std::vector<double> masses = a.masses_;
  masses.insert(masses.end(), b.masses_.begin(), b.masses_.end());
  return GridSpec(std::move(axes), std::move(pmap), std::move(masses));
}

std::vector<double> GridSpec::axis_masses() const {
  std::vector<double> out(ndim());
  for (std::size_t k = 0; k < ndim(); ++k) out[k] = axis_mass(k);
  return out;
}

void GridSpec::unravel(std::size_t flat, std::span<std::size_t> index) const {
  for (std::size_t k = 0; k < ndim(); ++k) {
    index[k] = (flat / strides_[k]) % axes_[k].npoints;
  }
}

std::vector<double> GridSpec::node_coords(std::size_t flat) const {
  std::vector<double> q(ndim());
  for (std::size_t k = 0; k < ndim(); ++k) {
    q[k] = axes_[k].node((flat / strides_[k]) % axes_[k].npoints);
  }
  return q;
}

bool GridSpec::contains(std::span<const double> q) const {
  if (q.size() != ndim()) return false;
  for (std::size_t k = 0; k < ndim(); ++k) {
    if (!(q[k] > axes_[k].lower && q[k] < axes_[k].upper)) return false;
  }
  return true;
}

bool GridSpec::inside_margin(std::span<const double> q, double cells) const {
  if (q.size() != ndim()) return false;
  for (std::size_t k = 0; k < ndim(); ++k) {
    const double m = cells * axes_[k].spacing();
    if (!(q[k] > axes_[k].lower + m && q[k] < axes_[k].upper - m)) return false;
  }
  return true;
}

GridSpec GridSpec::sub_grid(std::span<const std::size_t> dims) const {
  std::vector<Axis> axes;
  std::vector<std::size_t> old_particles;
  for (std::size_t d : dims) {
    if (d >= ndim()) throw ValidationError("axis index out of range");
    axes.push_back(axes_[d]);
    old_particles.push_back(particle_of_axis_[d]);
  }
  std::vector<std::size_t> kept;
  std::vector<std::size_t> pmap;
  for (std::size_t p : old_particles) {
    auto it = std::find(kept.begin(), kept.end(), p);
    if (it == kept.end()) {
      kept.push_back(p);
      pmap.push_back(kept.size() - 1);
    } else {
      pmap.push_back(static_cast<std::size_t>(it - kept.begin()));
    }
  }
  std::vector<double> masses;
  for (std::size_t p : kept) masses.push_back(masses_[p]);
  return GridSpec(std::move(axes), std::move(pmap), std::move(masses));
}

bool GridSpec::operator==(const GridSpec& other) const {
  return axes_ == other.axes_ && particle_of_axis_ == other.particle_of_axis_ &&
         masses_ == other.masses_;
}

WaveFunction::WaveFunction(GridSpec grid, std::size_t spin,
                           std::vector<cplx> amplitudes, double time,
                           cplx factor)
    : grid_(std::move(grid)),
      spin_(spin),
      amps_(std::move(amplitudes)),
      time_(time),
      factor_(factor) {
  if (spin_ == 0) throw ValidationError("spin component count must be >= 1");
  if (amps_.size() != grid_.size() * spin_) {
    throw ValidationError("expected " + std::to_string(grid_.size() * spin_) +
                          " amplitudes, got " + std::to_string(amps_.size()));
  }
  if (!std::isfinite(factor_.real()) || !std::isfinite(factor_.imag())) {
    throw NumericalError("non-finite global factor");
  }
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    if (!std::isfinite(amps_[i].real()) || !std::isfinite(amps_[i].imag())) {
      throw NumericalError("non-finite amplitude at index " +
                           std::to_string(i));
    }
  }
}

WaveFunction WaveFunction::zeros(GridSpec grid, std::size_t spin, double time) {
  std::vector<cplx> amps(grid.size() * spin);
  return WaveFunction(std::move(grid), spin, std::move(amps), time);
}

std::vector<cplx> WaveFunction::amplitudes() const {
  std::vector<cplx> out(amps_);
  if (factor_ != cplx(1.0)) {
    for (cplx& a : out) a *= factor_;
  }
  return out;
}

WaveFunction WaveFunction::scaled(cplx c) const {
  WaveFunction out(*this);
  out.factor_ *= c;
  return out;
}

WaveFunction WaveFunction::normalized() const {
  const double n = norm(*this);
  if (!(n > 0.0)) throw NumericalError("cannot normalize a zero wave function");
  return scaled(1.0 / n);
}

WaveFunction WaveFunction::with_time(double t) const {
  WaveFunction out(*this);
  out.time_ = t;
  return out;
}

WaveFunction WaveFunction::materialized() const {
  return WaveFunction(grid_, spin_, amplitudes(), time_);
}

double WaveFunction::raw_norm_squared() const {
  double sum = 0.0;
  for (const cplx& a : amps_) sum += std::norm(a);
  return sum * grid_.cell_volume();
}

double WaveFunction::raw_mean_density() const {
  double sum = 0.0;
  for (const cplx& a : amps_) sum += std::norm(a);
  return sum / static_cast<double>(grid_.size());
}

WaveFunction make_gaussian(const GridSpec& grid, std::span<const double> center,
                           std::span<const double> width,
                           std::span<const double> wavevector,
                           std::span<const cplx> spinor) {
  const std::size_t d = grid.ndim();
  if (center.size() != d || width.size() != d || wavevector.size() != d) {
    throw ValidationError("gaussian parameters must have " + std::to_string(d) +
                          " entries");
  }
  for (double w : width) {
    if (!(w > 0.0)) throw ValidationError("gaussian widths must be positive");
  }
  const std::vector<cplx> unit{cplx(1.0)};
  if (spinor.empty()) spinor = unit;
  double spinor_norm = 0.0;
  for (const cplx& s : spinor) spinor_norm += std::norm(s);
  if (!(spinor_norm > 0.0)) throw ValidationError("spinor must be nonzero");

  const std::size_t spin = spinor.size();
  std::vector<cplx> amps(grid.size() * spin);
  std::vector<std::size_t> idx(d);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    grid.unravel(p, idx);
    double envelope = 0.0;
    double phase = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double q = grid.axis(k).node(idx[k]);
      const double z = q - center[k];
      envelope -= z * z / (4.0 * width[k] * width[k]);
      phase += wavevector[k] * q;
    }
    const cplx base = std::exp(cplx(envelope, phase));
    for (std::size_t s = 0; s < spin; ++s) amps[p * spin + s] = base * spinor[s];
  }
  WaveFunction wf(grid, spin, std::move(amps));
  const double n = std::sqrt(wf.raw_norm_squared());
  if (!(n > 0.0)) {
    throw ValidationError("gaussian has no support on the grid");
  }
  return wf.materialized().scaled(1.0 / n).materialized();
}

double norm(const WaveFunction& wf) {
  return std::abs(wf.factor()) * std::sqrt(wf.raw_norm_squared());
}

cplx inner(const WaveFunction& a, const WaveFunction& b) {
  if (!(a.grid() == b.grid()) || a.spin() != b.spin()) {
    throw ValidationError("inner product needs matching grids and spin counts");
  }
  cplx sum = 0.0;
  const auto ra = a.raw();
  const auto rb = b.raw();
  for (std::size_t i = 0; i < ra.size(); ++i) sum += std::conj(ra[i]) * rb[i];
  return std::conj(a.factor()) * b.factor() * sum * a.grid().cell_volume();
}

std::vector<cplx> evaluate(const WaveFunction& wf, std::span<const double> q) {
  const GridSpec& grid = wf.grid();
  if (q.size() != grid.ndim()) {
    throw ValidationError("configuration has " + std::to_string(q.size()) +
                          " coordinates, grid has " +
                          std::to_string(grid.ndim()));
  }
  detail::Stencil st;
  if (!detail::make_stencil(grid, q, st)) {
    throw DomainError("configuration outside the grid domain");
  }
  const std::size_t spin = wf.spin();
  const auto raw = wf.raw();
  std::vector<cplx> out(spin);
  for (std::size_t c = 0; c < st.count; ++c) {
    const std::size_t base = st.offset[c] * spin;
    for (std::size_t s = 0; s < spin; ++s) out[s] += st.weight[c] * raw[base + s];
  }
  if (wf.factor() != cplx(1.0)) {
    for (cplx& v : out) v *= wf.factor();
  }
  return out;
}

WaveFunction tensor_product(const WaveFunction& a, const WaveFunction& b) {
  if (a.spin() != 1 || b.spin() != 1) {
    throw ValidationError("tensor_product supports scalar wave functions only");
  }
  GridSpec grid = GridSpec::product(a.grid(), b.grid());
  const auto ra = a.raw();
  const auto rb = b.raw();
  std::vector<cplx> amps(ra.size() * rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    for (std::size_t j = 0; j < rb.size(); ++j) amps[i * rb.size() + j] = ra[i] * rb[j];
  }
  return WaveFunction(std::move(grid), 1, std::move(amps), a.time(),
                      a.factor() * b.factor());
}

std::vector<double> node_densities(const WaveFunction& wf) {
  const std::size_t spin = wf.spin();
  const double f2 = std::norm(wf.factor());
  const auto raw = wf.raw();
  std::vector<double> out(wf.grid().size());
  for (std::size_t p = 0; p < out.size(); ++p) {
    double rho = 0.0;
    for (std::size_t s = 0; s < spin; ++s) rho += std::norm(raw[p * spin + s]);
    out[p] = f2 * rho;
  }
  return out;
}

double edge_mass(const WaveFunction& wf, double fraction) {
  const GridSpec& grid = wf.grid();
  const std::vector<double> rho = node_densities(wf);
  double total = 0.0;
  for (double r : rho) total += r;
  if (!(total > 0.0)) return 0.0;

  double worst = 0.0;
  std::vector<std::size_t> idx(grid.ndim());
  for (std::size_t k = 0; k < grid.ndim(); ++k) {
    const Axis& ax = grid.axis(k);
    const double band = fraction * ax.extent();
    double low = 0.0;
    double high = 0.0;
    for (std::size_t p = 0; p < rho.size(); ++p) {
      const double q = ax.node((p / grid.stride(k)) % ax.npoints);
      if (q < ax.lower + band) low += rho[p];
      if (q > ax.upper - band) high += rho[p];
    }
    worst = std::max({worst, low / total, high / total});
  }
  return worst;
}

std::vector<double> wavenumbers(const Axis& axis, bool zero_nyquist) {
  const std::size_t n = axis.npoints;
  const double dk = 2.0 * std::numbers::pi / axis.extent();
  std::vector<double> k(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double m = (2 * j < n) ? static_cast<double>(j)
                                 : static_cast<double>(j) - static_cast<double>(n);
    k[j] = m * dk;
  }
  if (zero_nyquist && n % 2 == 0) k[n / 2] = 0.0;
  return k;
}

}  // namespace bohm
