#include "bohm/snapshot.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>

#include "bohm/error.hpp"

namespace bohm {
namespace {

constexpr std::array<char, 8> kMagic{'B', 'O', 'H', 'M', 'W', 'F', '0', '1'};

template <typename T>
void put(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  if (!in) throw ValidationError("truncated snapshot");
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

void write_snapshot(std::ostream& out, const WaveFunction& wf) {
  const GridSpec& grid = wf.grid();
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(grid.ndim()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(wf.spin()));
  put<double>(out, wf.time());
  for (const Axis& ax : grid.axes()) {
    put<double>(out, ax.lower);
    put<double>(out, ax.upper);
    put<std::uint64_t>(out, ax.npoints);
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(grid.nparticles()));
  for (std::size_t p : grid.particle_of_axis()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p));
  }
  for (double m : grid.masses()) put<double>(out, m);
  const auto raw = wf.raw();
  const cplx f = wf.factor();
  for (const cplx& a : raw) {
    const cplx v = f * a;
    put<float>(out, static_cast<float>(v.real()));
    put<float>(out, static_cast<float>(v.imag()));
  }
  if (!out) throw Error("failed to write snapshot");
}

void write_snapshot(const std::filesystem::path& path, const WaveFunction& wf) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_snapshot(out, wf);
}

WaveFunction read_snapshot(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ValidationError("not a wave-function snapshot");
  const auto ndim = get<std::uint32_t>(in);
  const auto spin = get<std::uint32_t>(in);
  const double time = get<double>(in);
  if (ndim == 0 || ndim > kMaxDims) throw ValidationError("bad snapshot dimension");
  std::vector<Axis> axes(ndim);
  for (Axis& ax : axes) {
    ax.lower = get<double>(in);
    ax.upper = get<double>(in);
    ax.npoints = static_cast<std::size_t>(get<std::uint64_t>(in));
  }
  const auto nparticles = get<std::uint32_t>(in);
  std::vector<std::size_t> pmap(ndim);
  for (auto& p : pmap) p = get<std::uint32_t>(in);
  std::vector<double> masses(nparticles);
  for (double& m : masses) m = get<double>(in);
  GridSpec grid(std::move(axes), std::move(pmap), std::move(masses));
  std::vector<cplx> amps(grid.size() * spin);
  for (cplx& a : amps) {
    const float re = get<float>(in);
    const float im = get<float>(in);
    a = cplx(re, im);
  }
  return WaveFunction(std::move(grid), spin, std::move(amps), time);
}

WaveFunction read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_snapshot(in);
}

void write_csv(std::ostream& out, const WaveFunction& wf) {
  const GridSpec& grid = wf.grid();
  for (std::size_t k = 0; k < grid.ndim(); ++k) out << 'q' << k << ',';
  for (std::size_t s = 0; s < wf.spin(); ++s) {
    out << "re" << s << ",im" << s << (s + 1 < wf.spin() ? "," : "\n");
  }
  out << std::setprecision(17);
  std::vector<std::size_t> idx(grid.ndim());
  for (std::size_t p = 0; p < grid.size(); ++p) {
    grid.unravel(p, idx);
    for (std::size_t k = 0; k < grid.ndim(); ++k) {
      out << grid.axis(k).node(idx[k]) << ',';
    }
    for (std::size_t s = 0; s < wf.spin(); ++s) {
      const cplx v = wf.at(p, s);
      out << v.real() << ',' << v.imag() << (s + 1 < wf.spin() ? "," : "\n");
    }
  }
}

void write_csv(const std::filesystem::path& path, const WaveFunction& wf) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_csv(out, wf);
}

}  // namespace bohm
