#pragma once

// Wave-function snapshot files.
//
// Binary layout, all fields little-endian:
//   char[8]  magic "BOHMWF01"
//   u32      ndim
//   u32      spin components S
//   f64      time tag
//   ndim x { f64 lower, f64 upper, u64 npoints }
//   u32      particle count P
//   ndim x u32  particle index of each axis
//   P x f64  particle masses
//   (prod npoints) x S x { f32 re, f32 im }   row-major nodes, spin innermost
//
// The CSV export has one row per node: q0..q{d-1}, re0, im0, re1, im1, ...

#include <filesystem>
#include <iosfwd>

#include "bohm/fields.hpp"

namespace bohm {

void write_snapshot(std::ostream& out, const WaveFunction& wf);
void write_snapshot(const std::filesystem::path& path, const WaveFunction& wf);
WaveFunction read_snapshot(std::istream& in);
WaveFunction read_snapshot(const std::filesystem::path& path);

void write_csv(std::ostream& out, const WaveFunction& wf);
void write_csv(const std::filesystem::path& path, const WaveFunction& wf);

}  // namespace bohm
