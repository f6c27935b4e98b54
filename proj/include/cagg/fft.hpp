#pragma once

// Free-space (aperiodic) convolution of grid fields with a fixed kernel via
// zero padding to twice the grid extent, backed by FFTW.

#include <fftw3.h>

#include <complex>
#include <functional>
#include <memory>
#include <mutex>
#include <vector>

#include "cagg/grid.hpp"

namespace cagg {

namespace detail {

/// FFTW's planner is not re-entrant.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <class T>
using fftw_buffer = std::unique_ptr<T[], FftwFree>;

template <class T>
fftw_buffer<T> fftw_alloc(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw std::bad_alloc();
  return fftw_buffer<T>(p);
}

}  // namespace detail

/// out(i) = sum_j kernel(i - j) * in(j) over the whole grid, computed exactly
/// (no periodic images). The kernel is given on integer cell offsets.
class FreeSpaceConvolver {
 public:
  FreeSpaceConvolver(const GridSpec& grid, const std::function<double(int, int)>& kernel)
      : grid_(grid), px_(2 * grid.nx), py_(2 * grid.ny), nc_(static_cast<std::size_t>(py_) * (px_ / 2 + 1)) {
    grid_.validate();
    real_ = detail::fftw_alloc<double>(static_cast<std::size_t>(px_) * py_);
    spec_ = detail::fftw_alloc<fftw_complex>(nc_);
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      forward_ = fftw_plan_dft_r2c_2d(py_, px_, real_.get(), spec_.get(), FFTW_ESTIMATE);
      backward_ = fftw_plan_dft_c2r_2d(py_, px_, spec_.get(), real_.get(), FFTW_ESTIMATE);
    }
    if (forward_ == nullptr || backward_ == nullptr) throw solver_error("FreeSpaceConvolver: FFTW planning failed");

    std::fill(real_.get(), real_.get() + static_cast<std::size_t>(px_) * py_, 0.0);
    for (int dj = -(grid.ny - 1); dj <= grid.ny - 1; ++dj) {
      const int row = dj < 0 ? dj + py_ : dj;
      for (int di = -(grid.nx - 1); di <= grid.nx - 1; ++di) {
        const int col = di < 0 ? di + px_ : di;
        real_[static_cast<std::size_t>(row) * px_ + col] = kernel(di, dj);
      }
    }
    fftw_execute(forward_);
    kernel_hat_.resize(nc_);
    const double norm = 1.0 / (static_cast<double>(px_) * py_);
    for (std::size_t k = 0; k < nc_; ++k) kernel_hat_[k] = std::complex<double>(spec_[k][0], spec_[k][1]) * norm;
  }

  FreeSpaceConvolver(const FreeSpaceConvolver&) = delete;
  FreeSpaceConvolver& operator=(const FreeSpaceConvolver&) = delete;

  ~FreeSpaceConvolver() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    if (forward_ != nullptr) fftw_destroy_plan(forward_);
    if (backward_ != nullptr) fftw_destroy_plan(backward_);
  }

  const GridSpec& grid() const { return grid_; }

  ScalarField apply(const ScalarField& in) const {
    require_same_grid(grid_, in.grid(), "FreeSpaceConvolver::apply");
    std::lock_guard lock(mutex_);
    const std::size_t total = static_cast<std::size_t>(px_) * py_;
    std::fill(real_.get(), real_.get() + total, 0.0);
    for (int j = 0; j < grid_.ny; ++j)
      for (int i = 0; i < grid_.nx; ++i) real_[static_cast<std::size_t>(j) * px_ + i] = in(i, j);
    fftw_execute(forward_);
    for (std::size_t k = 0; k < nc_; ++k) {
      const std::complex<double> v = std::complex<double>(spec_[k][0], spec_[k][1]) * kernel_hat_[k];
      spec_[k][0] = v.real();
      spec_[k][1] = v.imag();
    }
    fftw_execute(backward_);
    ScalarField out(grid_);
    for (int j = 0; j < grid_.ny; ++j)
      for (int i = 0; i < grid_.nx; ++i) out(i, j) = real_[static_cast<std::size_t>(j) * px_ + i];
    return out;
  }

 private:
  GridSpec grid_;
  int px_;
  int py_;
  std::size_t nc_;
  detail::fftw_buffer<double> real_;
  detail::fftw_buffer<fftw_complex> spec_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
  std::vector<std::complex<double>> kernel_hat_;
  mutable std::mutex mutex_;
};

}  // namespace cagg
