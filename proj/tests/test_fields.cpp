#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "bohm/error.hpp"
#include "bohm/fields.hpp"
#include "bohm/snapshot.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bohm;

TEST_CASE("axis nodes are periodic with the upper bound excluded") {
  const Axis a{-2.0, 2.0, 8};
  CHECK(a.spacing() == doctest::Approx(0.5));
  CHECK(a.node(0) == -2.0);
  CHECK(a.node(7) == doctest::Approx(1.5));
}

TEST_CASE("grid products keep particles and masses apart") {
  const GridSpec x = GridSpec::line(-1, 1, 4, 2.0);
  const GridSpec y = GridSpec::line(0, 3, 6, 5.0);
  const GridSpec g = GridSpec::product(x, y);
  CHECK(g.ndim() == 2);
  CHECK(g.size() == 24);
  CHECK(g.nparticles() == 2);
  CHECK(g.axis_mass(0) == 2.0);
  CHECK(g.axis_mass(1) == 5.0);
  CHECK(g.cell_volume() == doctest::Approx(0.5 * 0.5));

  // Row-major: the last axis runs fastest.
  std::vector<std::size_t> idx(2);
  g.unravel(7, idx);
  CHECK(idx[0] == 1);
  CHECK(idx[1] == 1);

  const std::size_t keep = 1;
  const GridSpec s = g.sub_grid(std::span(&keep, 1));
  CHECK(s.ndim() == 1);
  CHECK(s.axis(0) == y.axis(0));
  CHECK(s.masses() == std::vector<double>{5.0});
}

TEST_CASE("a particle spanning several axes shares one mass") {
  const GridSpec g({Axis{-1, 1, 4}, Axis{-1, 1, 4}, Axis{-1, 1, 4}}, {0, 0, 1}, {3.0, 7.0});
  CHECK(g.axis_masses() == std::vector<double>{3.0, 3.0, 7.0});
}

TEST_CASE("invalid grids are rejected") {
  CHECK_THROWS_AS(GridSpec::line(1, -1, 8), ValidationError);
  CHECK_THROWS_AS(GridSpec::line(0, 1, 1), ValidationError);
  CHECK_THROWS_AS(GridSpec::line(0, 1, 8, -1.0), ValidationError);
  CHECK_THROWS_AS(GridSpec({Axis{0, 1, 1024}, Axis{0, 1, 1024}}, {}, {}, 1000), ValidationError);
  CHECK_THROWS_AS(GridSpec({Axis{0, 1, 4}}, {0}, {1.0, 2.0}), ValidationError);
}

TEST_CASE("gaussians are normalized and centered where asked") {
  const GridSpec g = GridSpec::line(-20, 20, 512);
  const double c = 1.5, w = 1.2, k = 0.7;
  const WaveFunction wf = make_gaussian(g, std::span(&c, 1), std::span(&w, 1), std::span(&k, 1));
  CHECK(norm(wf) == doctest::Approx(1.0).epsilon(1e-12));
  const auto m = oracle::moments(wf, 0);
  CHECK(m.mean == doctest::Approx(c).epsilon(1e-10));
  CHECK(m.sd == doctest::Approx(w).epsilon(1e-10));
  CHECK_THROWS_AS(make_gaussian(g, std::span(&c, 1), std::span(&k, 0), std::span(&k, 1)),
                  ValidationError);
}

TEST_CASE("inner products are sesquilinear and match direct sums") {
  std::mt19937_64 rng(5);
  const GridSpec g = GridSpec::product(GridSpec::line(-6, 6, 32), GridSpec::line(-6, 6, 24));
  const WaveFunction a = oracle::random_state(g, rng);
  const WaveFunction b = oracle::random_state(g, rng);
  cplx direct = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) direct += std::conj(a.at(i)) * b.at(i);
  direct *= g.cell_volume();
  const cplx ab = inner(a, b);
  CHECK(std::abs(ab - direct) < 1e-13);
  CHECK(std::abs(inner(b, a) - std::conj(ab)) < 1e-13);
  const cplx c(0.3, -2.0);
  CHECK(std::abs(inner(a, b.scaled(c)) - c * ab) < 1e-13);
  CHECK(std::abs(inner(a.scaled(c), b) - std::conj(c) * ab) < 1e-13);
  CHECK(norm(a.scaled(c)) == doctest::Approx(std::abs(c)));
}

TEST_CASE("scaling touches only the global factor") {
  std::mt19937_64 rng(6);
  const WaveFunction a = oracle::random_state(GridSpec::line(-5, 5, 64), rng);
  const WaveFunction b = a.scaled({0.0, 3.0});
  CHECK(std::equal(a.raw().begin(), a.raw().end(), b.raw().begin()));
  const WaveFunction m = b.materialized();
  CHECK(m.factor() == cplx(1.0));
  for (std::size_t i = 0; i < 64; ++i) CHECK(std::abs(m.at(i) - b.at(i)) < 1e-15);
}

TEST_CASE("evaluation is exact at nodes and multilinear between them") {
  std::mt19937_64 rng(7);
  const GridSpec g = GridSpec::product(GridSpec::line(-4, 4, 16), GridSpec::line(-3, 3, 12));
  const WaveFunction wf = oracle::random_state(g, rng, false, 2);
  std::vector<std::size_t> idx(2);
  for (std::size_t node : {13ul, 37ul, 101ul}) {
    const auto q = g.node_coords(node);
    const auto v = evaluate(wf, q);
    CHECK(v[0] == wf.at(node, 0));
    CHECK(v[1] == wf.at(node, 1));
  }
  // Bilinear oracle inside cell (5, 4).
  const double fx = 0.3, fy = 0.8;
  const std::vector<double> q{g.axis(0).node(5) + fx * g.axis(0).spacing(),
                              g.axis(1).node(4) + fy * g.axis(1).spacing()};
  auto at = [&](std::size_t i, std::size_t j) { return wf.at(i * 12 + j, 1); };
  const cplx expect = (1 - fx) * (1 - fy) * at(5, 4) + fx * (1 - fy) * at(6, 4) +
                      (1 - fx) * fy * at(5, 5) + fx * fy * at(6, 5);
  CHECK(std::abs(evaluate(wf, q)[1] - expect) < 1e-14);
}

TEST_CASE("tensor products multiply norms and densities") {
  const GridSpec gx = GridSpec::line(-5, 5, 32);
  const GridSpec gy = GridSpec::line(-4, 4, 16, 3.0);
  std::mt19937_64 rng(8);
  const WaveFunction a = oracle::random_state(gx, rng).scaled(2.0);
  const WaveFunction b = oracle::random_state(gy, rng).scaled(0.5);
  const WaveFunction ab = tensor_product(a, b);
  CHECK(ab.grid() == GridSpec::product(gx, gy));
  CHECK(norm(ab) == doctest::Approx(1.0));
  const auto rho = node_densities(ab);
  CHECK(rho[3 * 16 + 9] == doctest::Approx(std::norm(a.at(3)) * std::norm(b.at(9))));
}

TEST_CASE("edge mass sees a packet pushed against the boundary") {
  const GridSpec g = GridSpec::line(-10, 10, 256);
  const double w = 0.5, k = 0.0;
  const double mid = 0.0, edge = 9.6;
  CHECK(edge_mass(make_gaussian(g, std::span(&mid, 1), std::span(&w, 1), std::span(&k, 1))) <
        1e-12);
  CHECK(edge_mass(make_gaussian(g, std::span(&edge, 1), std::span(&w, 1), std::span(&k, 1))) >
        0.3);
}

TEST_CASE("wavenumbers follow FFT order") {
  const Axis a{0.0, 2.0 * oracle::pi, 8};
  const auto k0 = wavenumbers(a, true);
  const auto k1 = wavenumbers(a, false);
  CHECK(k0 == std::vector<double>{0, 1, 2, 3, 0, -3, -2, -1});
  CHECK(k1[4] == -4.0);
}

TEST_CASE("snapshots round-trip grids exactly and amplitudes to single precision") {
  std::mt19937_64 rng(9);
  const GridSpec g({Axis{-3, 3, 10}, Axis{-2, 5, 6}}, {0, 1}, {1.5, 20.0});
  const WaveFunction wf = oracle::random_state(g, rng, false, 2).scaled({0.0, 2.0}).with_time(1.25);
  std::stringstream buf;
  write_snapshot(buf, wf);
  const WaveFunction back = read_snapshot(buf);
  CHECK(back.grid() == g);
  CHECK(back.spin() == 2);
  CHECK(back.time() == 1.25);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t s = 0; s < 2; ++s) {
      CHECK(std::abs(back.at(i, s) - wf.at(i, s)) <= 1e-6 * (std::abs(wf.at(i, s)) + 1e-30));
    }
  }
  // Header: magic, ndim, spin, time.
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 8) == "BOHMWF01");
  CHECK(bytes.size() == 8 + 4 + 4 + 8 + 2 * 24 + 4 + 2 * 4 + 2 * 8 + 60 * 2 * 8);
}

TEST_CASE("corrupt snapshots are refused") {
  std::stringstream bad("NOTAWAVEFUNCTION");
  CHECK_THROWS_AS(read_snapshot(bad), ValidationError);
  const GridSpec g = GridSpec::line(-1, 1, 4);
  std::stringstream buf;
  write_snapshot(buf, WaveFunction::zeros(g));
  std::string s = buf.str();
  s.resize(s.size() - 3);
  std::stringstream cut(s);
  CHECK_THROWS_AS(read_snapshot(cut), ValidationError);
}

TEST_CASE("csv export has one row per node") {
  const GridSpec g = GridSpec::product(GridSpec::line(-1, 1, 3), GridSpec::line(-1, 1, 4));
  std::stringstream out;
  write_csv(out, WaveFunction::zeros(g, 2));
  std::string line;
  std::size_t rows = 0;
  std::getline(out, line);
  const auto header_cols = std::count(line.begin(), line.end(), ',') + 1;
  CHECK(header_cols == 2 + 4);
  while (std::getline(out, line)) ++rows;
  CHECK(rows == 12);
}
