#include "fft.hpp"

#include <algorithm>
#include <mutex>
#include <numeric>
#include <vector>

#include "bohm/error.hpp"

namespace bohm::detail {
namespace {

// The FFTW planner is not thread-safe.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

FftPlan::FftPlan(const GridSpec& grid, std::size_t spin,
                 std::span<const std::size_t> axes)
    : size_(grid.size() * spin) {
  std::vector<fftw_iodim> dims;
  std::vector<fftw_iodim> loops;
  for (std::size_t k = 0; k < grid.ndim(); ++k) {
    fftw_iodim d{};
    d.n = static_cast<int>(grid.axis(k).npoints);
    d.is = d.os = static_cast<int>(grid.stride(k) * spin);
    if (std::find(axes.begin(), axes.end(), k) != axes.end()) {
      dims.push_back(d);
      scale_ /= static_cast<double>(grid.axis(k).npoints);
    } else {
      loops.push_back(d);
    }
  }
  if (dims.empty()) throw ValidationError("FFT needs at least one axis");
  if (spin > 1) loops.push_back(fftw_iodim{static_cast<int>(spin), 1, 1});

  buf_ = fftw_alloc_complex(size_);
  if (buf_ == nullptr) throw Error("FFT buffer allocation failed");
  std::lock_guard lock(planner_mutex());
  forward_ = fftw_plan_guru_dft(static_cast<int>(dims.size()), dims.data(),
                                static_cast<int>(loops.size()), loops.data(),
                                buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
  backward_ = fftw_plan_guru_dft(static_cast<int>(dims.size()), dims.data(),
                                 static_cast<int>(loops.size()), loops.data(),
                                 buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
  if (forward_ == nullptr || backward_ == nullptr) {
    throw Error("FFTW planning failed");
  }
}

FftPlan::FftPlan(const GridSpec& grid, std::size_t spin)
    : FftPlan(grid, spin, [&] {
        std::vector<std::size_t> all(grid.ndim());
        std::iota(all.begin(), all.end(), std::size_t{0});
        return all;
      }()) {}

FftPlan::~FftPlan() {
  std::lock_guard lock(planner_mutex());
  if (forward_ != nullptr) fftw_destroy_plan(forward_);
  if (backward_ != nullptr) fftw_destroy_plan(backward_);
  if (buf_ != nullptr) fftw_free(buf_);
}

}  // namespace bohm::detail
