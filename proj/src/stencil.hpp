#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>

#include "bohm/fields.hpp"

namespace bohm::detail {

// Multilinear interpolation weights over a subset of grid axes. Coordinates
// that sit on a node (to within kSnap cell units) contribute a single corner,
// which makes interpolation exact at nodes.
struct Stencil {
  static constexpr double kSnap = 1e-11;

  std::size_t count = 0;
  std::array<std::size_t, std::size_t{1} << kMaxDims> offset{};
  std::array<double, std::size_t{1} << kMaxDims> weight{};
};

// `q` holds one coordinate per entry of `dims`. Returns false when a
// coordinate is not strictly inside (lower, upper).
inline bool make_stencil(const GridSpec& grid, std::span<const std::size_t> dims,
                         std::span<const double> q, Stencil& out) {
  out.count = 1;
  out.offset[0] = 0;
  out.weight[0] = 1.0;
  for (std::size_t j = 0; j < dims.size(); ++j) {
    const Axis& ax = grid.axis(dims[j]);
    const double x = q[j];
    if (!(x > ax.lower && x < ax.upper)) return false;
    const double s = (x - ax.lower) / ax.spacing();
    const double r = std::nearbyint(s);
    const std::size_t n = ax.npoints;
    const std::size_t stride = grid.stride(dims[j]);
    if (std::abs(s - r) < Stencil::kSnap) {
      const std::size_t i = static_cast<std::size_t>(r) % n;
      for (std::size_t c = 0; c < out.count; ++c) out.offset[c] += i * stride;
      continue;
    }
    const double fl = std::floor(s);
    const double f = s - fl;
    const std::size_t i0 = static_cast<std::size_t>(fl) % n;
    const std::size_t i1 = (i0 + 1) % n;
    for (std::size_t c = 0; c < out.count; ++c) {
      out.offset[c + out.count] = out.offset[c] + i1 * stride;
      out.weight[c + out.count] = out.weight[c] * f;
      out.offset[c] += i0 * stride;
      out.weight[c] *= 1.0 - f;
    }
    out.count *= 2;
  }
  return true;
}

inline bool make_stencil(const GridSpec& grid, std::span<const double> q,
                         Stencil& out) {
  std::array<std::size_t, kMaxDims> dims{};
  for (std::size_t k = 0; k < grid.ndim(); ++k) dims[k] = k;
  return make_stencil(grid, std::span(dims.data(), grid.ndim()), q, out);
}

}  // namespace bohm::detail
