#include <algorithm>
#include <cmath>

#include "bohm/equilibrium.hpp"
#include "bohm/error.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bohm;

namespace {

WaveFunction gaussian1d(const GridSpec& g, double c, double w, double k) {
  return make_gaussian(g, std::span(&c, 1), std::span(&w, 1), std::span(&k, 1));
}

}  // namespace

TEST_CASE("sampling is deterministic per seed and stays in the box") {
  const GridSpec g = GridSpec::product(GridSpec::line(-5, 5, 32), GridSpec::line(-4, 4, 16));
  const std::vector<double> c{1.0, -0.5}, w{0.8, 0.6}, k{0.0, 1.0};
  const WaveFunction wf = make_gaussian(g, c, w, k);
  const SampleSet a = sample(wf, 500, 17);
  const SampleSet b = sample(wf, 500, 17);
  const SampleSet other = sample(wf, 500, 18);
  CHECK(a.size() == 500);
  CHECK(a.coords == b.coords);
  CHECK(a.coords != other.coords);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(g.contains(a.at(i).coords));
}

TEST_CASE("sample means and spreads match the density") {
  const GridSpec g = GridSpec::line(-10, 10, 256);
  const WaveFunction wf = gaussian1d(g, 1.5, 0.9, 0.0);
  const SampleSet s = sample(wf, 40000, 3);
  double m1 = 0.0, m2 = 0.0;
  for (double x : s.coords) {
    m1 += x;
    m2 += x * x;
  }
  m1 /= 40000.0;
  const double sd = std::sqrt(m2 / 40000.0 - m1 * m1);
  // Jitter adds dx^2/12 to the variance.
  const double dx = g.axis(0).spacing();
  CHECK(std::abs(m1 - 1.5) < 4.0 * 0.9 / std::sqrt(40000.0));
  CHECK(sd == doctest::Approx(std::sqrt(0.81 + dx * dx / 12.0)).epsilon(0.02));
}

TEST_CASE("KS critical coefficients") {
  CHECK(ks_critical_coefficient(0.01) == doctest::Approx(1.63));
  CHECK(ks_critical_coefficient(0.05) == doctest::Approx(1.36));
  // Kolmogorov tail: sqrt(-ln(alpha/2) / 2).
  CHECK(ks_critical_coefficient(0.02) == doctest::Approx(std::sqrt(-0.5 * std::log(0.01))).epsilon(1e-3));
}

TEST_CASE("the marginal CDF is piecewise linear over node-centered cells") {
  const GridSpec g = GridSpec::line(-10, 10, 200);
  const WaveFunction wf = gaussian1d(g, 0.0, 1.0, 0.0);
  const MarginalCdf F(wf, 0);
  CHECK(F(-10.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(F(9.9) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(F(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  // Close to the continuous normal CDF on a fine grid.
  for (double x : {-1.5, -0.3, 0.7, 2.0}) {
    CHECK(std::abs(F(x) - 0.5 * std::erfc(-x / std::sqrt(2.0))) < 2e-3);
  }
  double prev = 0.0;
  for (double x = -10.0; x < 10.0; x += 0.037) {
    CHECK(F(x) >= prev - 1e-15);
    prev = F(x);
  }
}

TEST_CASE("fit tests accept true samples and reject displaced ones") {
  const GridSpec g = GridSpec::product(GridSpec::line(-8, 8, 64), GridSpec::line(-8, 8, 64));
  const std::vector<double> c{0.0, 1.0}, w{1.0, 0.7}, k{0.0, 0.0};
  const WaveFunction wf = make_gaussian(g, c, w, k);
  const SampleSet s = sample(wf, 5000, 9);
  for (std::size_t d = 0; d < 2; ++d) {
    CHECK(ks_marginal(s, wf, d).pass);
    CHECK(chi_square_marginal(s, wf, d).pass);
  }
  const std::vector<double> c2{0.3, 1.0};
  const WaveFunction shifted = make_gaussian(g, c2, w, k);
  CHECK_FALSE(ks_marginal(s, shifted, 0).pass);
  CHECK_FALSE(chi_square_marginal(s, shifted, 0).pass);
  CHECK(ks_marginal(s, wf, 0).threshold == doctest::Approx(1.63 / std::sqrt(5000.0)));

  const SampleSet few = sample(wf, 50, 1);
  CHECK_THROWS_AS(ks_marginal(few, wf, 0), ValidationError);
}

TEST_CASE("KS statistic agrees with a direct sup-norm oracle") {
  const GridSpec g = GridSpec::line(-8, 8, 128);
  const WaveFunction wf = gaussian1d(g, 0.5, 1.0, 0.0);
  const SampleSet s = sample(wf, 300, 21);
  std::vector<double> x = s.coords;
  std::sort(x.begin(), x.end());
  const MarginalCdf F(wf, 0);
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = F(x[i]);
    d = std::max({d, double(i + 1) / double(x.size()) - f, f - double(i) / double(x.size())});
  }
  CHECK(ks_marginal(s, wf, 0).statistic == doctest::Approx(d).epsilon(1e-12));
}

TEST_CASE("equivariance holds for the true field and fails for a corrupted one") {
  const GridSpec g = GridSpec::line(-20, 20, 512);
  const WaveFunction wf = gaussian1d(g, -3.0, 1.0, 1.0);
  EquivarianceOptions opt;
  const auto good = equivariance_experiment(wf, HamiltonianSpec(), 1.5, 4000, 5, opt);
  CHECK(good.valid);
  CHECK(good.pass);
  CHECK(good.aborted == 0);
  opt.velocity_scale = 1.3;
  const auto bad = equivariance_experiment(wf, HamiltonianSpec(), 1.5, 4000, 5, opt);
  CHECK_FALSE(bad.pass);

  const std::vector<std::uint64_t> seeds{5, 6};
  const auto study = equivariance_study(wf, HamiltonianSpec(), 1.5, 4000, seeds, {});
  REQUIRE(study.size() == 2);
  CHECK(study[0].marginals[0].statistic == good.marginals[0].statistic);
}
