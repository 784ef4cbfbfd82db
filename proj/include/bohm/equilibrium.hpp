#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bohm/evolve.hpp"
#include "bohm/fields.hpp"

namespace bohm {

struct SampleSet {
  std::size_t ndim = 0;
  std::vector<double> coords;  // row-major n x ndim
  std::uint64_t seed = 0;
  double time = 0.0;

  std::size_t size() const { return ndim == 0 ? 0 : coords.size() / ndim; }
  Configuration at(std::size_t i) const;
};

// n independent draws from p(cell) proportional to psi^dagger psi, each
// jittered uniformly inside its node-centered cell (wrapped periodically).
// Deterministic for a given seed.
SampleSet sample(const WaveFunction& wf, std::size_t n, std::uint64_t seed);

enum class FitKind { ks, chi_square };
std::string to_string(FitKind k);

struct FitReport {
  FitKind kind = FitKind::ks;
  std::size_t dim = 0;
  std::size_t n = 0;
  double statistic = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::size_t aborted_count = 0;
};

// c(alpha) of the asymptotic one-sample KS test; the tabulated two-digit
// values for the usual levels, the Kolmogorov tail formula otherwise.
double ks_critical_coefficient(double alpha);

// Marginal of |psi|^2 on one axis as a piecewise-uniform density over the
// node-centered cells (the measure sample() draws from).
class MarginalCdf {
 public:
  MarginalCdf(const WaveFunction& wf, std::size_t dim);
  double operator()(double x) const;
  const std::vector<double>& cell_mass() const { return mass_; }

 private:
  Axis axis_;
  std::vector<double> mass_;
  std::vector<double> upper_edge_cdf_;  // CDF at node_j + dx/2
};

// sup |F_emp - F_wf| on axis `dim`; threshold c(alpha) / sqrt(n). Needs at
// least 100 points.
FitReport ks_marginal(std::span<const double> coords, std::size_t ndim,
                      const WaveFunction& wf, std::size_t dim,
                      double alpha = 0.01);
FitReport ks_marginal(const SampleSet& samples, const WaveFunction& wf,
                      std::size_t dim, double alpha = 0.01);

// Pearson chi-square of cell counts on axis `dim` against the marginal cell
// masses, pooling cells with expectation below 5; threshold is the upper
// alpha quantile of the chi-square distribution.
FitReport chi_square_marginal(const SampleSet& samples, const WaveFunction& wf,
                              std::size_t dim, double alpha = 0.01);

struct EquivarianceOptions {
  double dt = 0.005;
  double dt_traj = 0.05;
  double alpha = 0.01;
  double velocity_scale = 1.0;
  double max_abort_fraction = 1e-3;
  std::size_t threads = 1;
};

struct EquivarianceReport {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t aborted = 0;
  bool valid = true;  // aborted < max_abort_fraction * n
  bool pass = false;  // valid and every marginal passes
  std::vector<FitReport> marginals;
};

// Samples |psi_0|^2, transports the samples with the guiding equation while
// psi evolves under h, and KS-tests the final positions against the marginals
// of |psi_T|^2.
EquivarianceReport equivariance_experiment(const WaveFunction& wf0,
                                           const HamiltonianSpec& h, double T,
                                           std::size_t n, std::uint64_t seed,
                                           const EquivarianceOptions& options = {});

// The same experiment for many seeds, sharing one propagation of psi.
std::vector<EquivarianceReport> equivariance_study(
    const WaveFunction& wf0, const HamiltonianSpec& h, double T, std::size_t n,
    std::span<const std::uint64_t> seeds, const EquivarianceOptions& options = {});

}  // namespace bohm
