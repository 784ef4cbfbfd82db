#include "bohm/equilibrium.hpp"

#include <algorithm>
#include <array>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <random>

#include "bohm/error.hpp"
#include "bohm/guidance.hpp"

namespace bohm {
namespace {

double canonical(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

Configuration SampleSet::at(std::size_t i) const {
  return Configuration{
      std::vector<double>(coords.begin() + i * ndim, coords.begin() + (i + 1) * ndim),
      time};
}

SampleSet sample(const WaveFunction& wf, std::size_t n, std::uint64_t seed) {
  const GridSpec& grid = wf.grid();
  const std::size_t spin = wf.spin();
  const auto raw = wf.raw();
  std::vector<double> cumulative(grid.size());
  double total = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (std::size_t s = 0; s < spin; ++s) total += std::norm(raw[p * spin + s]);
    cumulative[p] = total;
  }
  if (!(total > 0.0)) throw NumericalError("cannot sample from a zero density");

  SampleSet out;
  out.ndim = grid.ndim();
  out.seed = seed;
  out.time = wf.time();
  out.coords.resize(n * out.ndim);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(out.ndim);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = canonical(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    grid.unravel(static_cast<std::size_t>(it - cumulative.begin()), idx);
    for (std::size_t k = 0; k < out.ndim; ++k) {
      const Axis& ax = grid.axis(k);
      double x = ax.node(idx[k]) + (canonical(rng) - 0.5) * ax.spacing();
      if (x < ax.lower) x += ax.extent();
      if (x >= ax.upper) x -= ax.extent();
      out.coords[i * out.ndim + k] = x;
    }
  }
  return out;
}

std::string to_string(FitKind k) {
  return k == FitKind::ks ? "KS" : "chi-square";
}

double ks_critical_coefficient(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  constexpr std::array<std::pair<double, double>, 6> table{{
      {0.10, 1.22}, {0.05, 1.36}, {0.025, 1.48}, {0.01, 1.63}, {0.005, 1.73}, {0.001, 1.95}}};
  for (const auto& [a, c] : table) {
    if (std::abs(alpha - a) < 1e-12) return c;
  }
  return std::sqrt(-0.5 * std::log(0.5 * alpha));
}

MarginalCdf::MarginalCdf(const WaveFunction& wf, std::size_t dim) {
  const GridSpec& grid = wf.grid();
  if (dim >= grid.ndim()) throw ValidationError("marginal axis out of range");
  axis_ = grid.axis(dim);
  const std::size_t n = axis_.npoints;
  mass_.assign(n, 0.0);
  const std::vector<double> rho = node_densities(wf);
  double total = 0.0;
  for (std::size_t p = 0; p < rho.size(); ++p) {
    mass_[(p / grid.stride(dim)) % n] += rho[p];
    total += rho[p];
  }
  if (!(total > 0.0)) throw NumericalError("marginal of a zero density");
  for (double& m : mass_) m /= total;
  // upper_edge_cdf_[j]: CDF at the upper edge of cell j, measured from the
  // box lower bound (cell 0 is split across both ends of the box).
  upper_edge_cdf_.resize(n + 1);
  upper_edge_cdf_[0] = 0.5 * mass_[0];
  for (std::size_t j = 1; j < n; ++j) upper_edge_cdf_[j] = upper_edge_cdf_[j - 1] + mass_[j];
  upper_edge_cdf_[n] = upper_edge_cdf_[n - 1] + 0.5 * mass_[0];
}

double MarginalCdf::operator()(double x) const {
  const double n = static_cast<double>(axis_.npoints);
  const double s = std::clamp((x - axis_.lower) / axis_.spacing(), 0.0, n);
  if (s < 0.5) return mass_[0] * s;
  const auto j = static_cast<std::size_t>(std::floor(s + 0.5));
  if (j >= axis_.npoints) {
    return upper_edge_cdf_[axis_.npoints - 1] + mass_[0] * (s - n + 0.5);
  }
  return upper_edge_cdf_[j - 1] + mass_[j] * (s - static_cast<double>(j) + 0.5);
}

FitReport ks_marginal(std::span<const double> coords, std::size_t ndim,
                      const WaveFunction& wf, std::size_t dim, double alpha) {
  if (ndim != wf.grid().ndim()) throw ValidationError("sample dimension mismatch");
  if (dim >= ndim) throw ValidationError("marginal axis out of range");
  const std::size_t n = coords.size() / ndim;
  if (n < 100) throw ValidationError("KS test needs at least 100 samples");
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = coords[i * ndim + dim];
  std::sort(x.begin(), x.end());
  const MarginalCdf cdf(wf, dim);
  const double nn = static_cast<double>(n);
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / nn - f, f - static_cast<double>(i) / nn});
  }
  FitReport r;
  r.kind = FitKind::ks;
  r.dim = dim;
  r.n = n;
  r.statistic = d;
  r.threshold = ks_critical_coefficient(alpha) / std::sqrt(nn);
  r.pass = d <= r.threshold;
  return r;
}

FitReport ks_marginal(const SampleSet& samples, const WaveFunction& wf,
                      std::size_t dim, double alpha) {
  return ks_marginal(samples.coords, samples.ndim, wf, dim, alpha);
}

FitReport chi_square_marginal(const SampleSet& samples, const WaveFunction& wf,
                              std::size_t dim, double alpha) {
  if (samples.ndim != wf.grid().ndim()) throw ValidationError("sample dimension mismatch");
  if (dim >= samples.ndim) throw ValidationError("marginal axis out of range");
  const std::size_t n = samples.size();
  if (n < 100) throw ValidationError("chi-square test needs at least 100 samples");
  const MarginalCdf cdf(wf, dim);
  const Axis& ax = wf.grid().axis(dim);
  std::vector<double> observed(ax.npoints, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = (samples.coords[i * samples.ndim + dim] - ax.lower) / ax.spacing();
    const auto j = static_cast<std::size_t>(std::floor(s + 0.5)) % ax.npoints;
    observed[j] += 1.0;
  }
  std::vector<double> bin_obs;
  std::vector<double> bin_exp;
  double o = 0.0;
  double e = 0.0;
  for (std::size_t j = 0; j < ax.npoints; ++j) {
    o += observed[j];
    e += static_cast<double>(n) * cdf.cell_mass()[j];
    if (e >= 5.0) {
      bin_obs.push_back(o);
      bin_exp.push_back(e);
      o = e = 0.0;
    }
  }
  if (bin_exp.empty()) {
    bin_obs.push_back(o);
    bin_exp.push_back(e);
  } else {
    bin_obs.back() += o;
    bin_exp.back() += e;
  }
  double chi2 = 0.0;
  for (std::size_t b = 0; b < bin_exp.size(); ++b) {
    const double diff = bin_obs[b] - bin_exp[b];
    chi2 += diff * diff / bin_exp[b];
  }
  FitReport r;
  r.kind = FitKind::chi_square;
  r.dim = dim;
  r.n = n;
  r.statistic = chi2;
  const double dof = static_cast<double>(std::max<std::size_t>(bin_exp.size(), 2) - 1);
  r.threshold = boost::math::quantile(
      boost::math::complement(boost::math::chi_squared_distribution<double>(dof), alpha));
  r.pass = chi2 <= r.threshold;
  return r;
}

std::vector<EquivarianceReport> equivariance_study(
    const WaveFunction& wf0, const HamiltonianSpec& h, double T, std::size_t n,
    std::span<const std::uint64_t> seeds, const EquivarianceOptions& options) {
  if (!(T >= 0.0)) throw ValidationError("transport time must be >= 0");
  if (n < 100) throw ValidationError("equivariance needs at least 100 samples per seed");
  const std::size_t ndim = wf0.grid().ndim();

  std::vector<double> positions;
  positions.reserve(seeds.size() * n * ndim);
  for (std::uint64_t seed : seeds) {
    const SampleSet s = sample(wf0, n, seed);
    positions.insert(positions.end(), s.coords.begin(), s.coords.end());
  }

  require_half_step_multiple(options.dt, options.dt_traj);
  IntegrationOptions io;
  io.record = false;
  io.velocity_scale = options.velocity_scale;
  io.threads = options.threads;
  const double t0 = wf0.time();
  PropagatedSource transport(wf0, h, options.dt);
  const TrajectoryEnsemble ens =
      integrate_ensemble(transport, positions, ndim, t0, t0 + T, options.dt_traj, io);
  const WaveFunction final_wf = transport.field_at(t0 + T)->wave();

  std::vector<EquivarianceReport> reports;
  for (std::size_t si = 0; si < seeds.size(); ++si) {
    EquivarianceReport rep;
    rep.seed = seeds[si];
    rep.n = n;
    std::vector<double> kept;
    kept.reserve(n * ndim);
    for (std::size_t i = si * n; i < (si + 1) * n; ++i) {
      if (ens.status[i] != TrajectoryStatus::completed) {
        ++rep.aborted;
        continue;
      }
      kept.insert(kept.end(), ens.final_positions.begin() + i * ndim,
                  ens.final_positions.begin() + (i + 1) * ndim);
    }
    rep.valid = static_cast<double>(rep.aborted) <
                options.max_abort_fraction * static_cast<double>(n);
    rep.pass = rep.valid;
    for (std::size_t d = 0; d < ndim; ++d) {
      FitReport fr = ks_marginal(kept, ndim, final_wf, d, options.alpha);
      fr.aborted_count = rep.aborted;
      rep.pass = rep.pass && fr.pass;
      rep.marginals.push_back(fr);
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

EquivarianceReport equivariance_experiment(const WaveFunction& wf0,
                                           const HamiltonianSpec& h, double T,
                                           std::size_t n, std::uint64_t seed,
                                           const EquivarianceOptions& options) {
  const std::uint64_t seeds[] = {seed};
  return equivariance_study(wf0, h, T, n, seeds, options).front();
}

}  // namespace bohm
