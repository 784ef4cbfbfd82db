#pragma once

#include <fftw3.h>

#include <cstddef>
#include <span>

#include "bohm/fields.hpp"

namespace bohm::detail {

// In-place complex DFT over a subset of the axes of a node-major array with
// `spin` interleaved components per node. Owns an FFTW-aligned buffer.
// Plans are created with FFTW_ESTIMATE so results are reproducible run to run.
class FftPlan {
 public:
  FftPlan(const GridSpec& grid, std::size_t spin,
          std::span<const std::size_t> axes);
  FftPlan(const GridSpec& grid, std::size_t spin);
  ~FftPlan();

  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  std::span<cplx> data() { return {reinterpret_cast<cplx*>(buf_), size_}; }
  void forward() { fftw_execute(forward_); }
  // Unnormalized; multiply by scale() to invert forward().
  void backward() { fftw_execute(backward_); }
  double scale() const { return scale_; }

 private:
  std::size_t size_ = 0;
  double scale_ = 1.0;
  fftw_complex* buf_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace bohm::detail
