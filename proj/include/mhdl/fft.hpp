#pragma once

// Thin RAII layer over FFTW for batched 2-D real transforms of horizontal
// planes. Plans live in a per-thread cache; only plan creation is serialized.

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <tuple>

namespace mhdl::detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Batched r2c / c2r transform of `howmany` contiguous n1 x n2 planes, x1 fastest.
// Complex layout per plane: (n1/2+1) x n2, m1 fastest.
class PlaneTransform {
 public:
  PlaneTransform(int n1, int n2, int howmany)
      : n1_(n1), n2_(n2), howmany_(howmany), nc1_(n1 / 2 + 1) {
    const std::size_t nreal = std::size_t(n1) * n2 * howmany;
    const std::size_t ncplx = std::size_t(nc1_) * n2 * howmany;
    real_ = fftw_alloc_real(nreal);
    spec_ = fftw_alloc_complex(ncplx);
    int dims[2] = {n2, n1};
    int cdims[2] = {n2, nc1_};
    std::lock_guard lock(fftw_planner_mutex());
    fwd_ = fftw_plan_many_dft_r2c(2, dims, howmany, real_, dims, 1, n1 * n2, spec_, cdims, 1,
                                  nc1_ * n2, FFTW_ESTIMATE);
    bwd_ = fftw_plan_many_dft_c2r(2, dims, howmany, spec_, cdims, 1, nc1_ * n2, real_, dims, 1,
                                  n1 * n2, FFTW_ESTIMATE);
  }
  PlaneTransform(const PlaneTransform&) = delete;
  PlaneTransform& operator=(const PlaneTransform&) = delete;
  ~PlaneTransform() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(real_);
    fftw_free(spec_);
  }

  int n1() const noexcept { return n1_; }
  int n2() const noexcept { return n2_; }
  int howmany() const noexcept { return howmany_; }
  std::size_t real_size() const noexcept { return std::size_t(n1_) * n2_ * howmany_; }
  std::size_t complex_size() const noexcept { return std::size_t(nc1_) * n2_ * howmany_; }

  // Unnormalized forward transform.
  void forward(std::span<const double> in, std::span<std::complex<double>> out) {
    std::copy(in.begin(), in.end(), real_);
    fftw_execute(fwd_);
    auto* src = reinterpret_cast<std::complex<double>*>(spec_);
    std::copy(src, src + complex_size(), out.begin());
  }

  // Inverse transform including the 1/(n1 n2) normalization.
  void backward(std::span<const std::complex<double>> in, std::span<double> out) {
    auto* dst = reinterpret_cast<std::complex<double>*>(spec_);
    std::copy(in.begin(), in.end(), dst);
    fftw_execute(bwd_);
    const double scale = 1.0 / (double(n1_) * n2_);
    for (std::size_t i = 0; i < real_size(); ++i) out[i] = real_[i] * scale;
  }

 private:
  int n1_, n2_, howmany_, nc1_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan fwd_{};
  fftw_plan bwd_{};
};

inline PlaneTransform& plane_transform(int n1, int n2, int howmany) {
  thread_local std::map<std::tuple<int, int, int>, std::unique_ptr<PlaneTransform>> cache;
  auto key = std::make_tuple(n1, n2, howmany);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, std::make_unique<PlaneTransform>(n1, n2, howmany)).first;
  }
  return *it->second;
}

}  // namespace mhdl::detail
