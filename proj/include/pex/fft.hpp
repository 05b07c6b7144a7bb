// SPDX-License-Identifier: MIT
//
// Thin FFTW wrapper: aligned buffers plus a mutex-guarded plan cache.
// All plans are FFTW_ESTIMATE so planning itself is deterministic and cheap;
// plans are created once per length and reused via the new-array interface.
#pragma once

#include <fftw3.h>

#include <cstddef>
#include <map>
#include <mutex>
#include <utility>

#include "pex/common.hpp"

namespace pex {

// RAII buffer allocated with fftw_malloc (guaranteed SIMD alignment, which
// keeps new-array execution valid for cached plans).
class FftBuf {
 public:
  explicit FftBuf(std::size_t n)
      : n_(n), p_(static_cast<cplx*>(fftw_malloc(sizeof(cplx) * n))) {
    if (!p_) throw std::bad_alloc();
  }
  ~FftBuf() { fftw_free(p_); }
  FftBuf(const FftBuf&) = delete;
  FftBuf& operator=(const FftBuf&) = delete;

  cplx* data() { return p_; }
  const cplx* data() const { return p_; }
  cplx& operator[](std::size_t i) { return p_[i]; }
  const cplx& operator[](std::size_t i) const { return p_[i]; }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  cplx* p_;
};

namespace detail {

inline std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

// One cached out-of-place backward (sign = +1) plan per length.
inline fftw_plan plan_backward_1d(std::size_t L) {
  static std::map<std::size_t, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(plan_mutex());
  auto it = cache.find(L);
  if (it != cache.end()) return it->second;
  FftBuf in(L), out(L);
  fftw_plan p = fftw_plan_dft_1d(int(L),
                                 reinterpret_cast<fftw_complex*>(in.data()),
                                 reinterpret_cast<fftw_complex*>(out.data()),
                                 FFTW_BACKWARD, FFTW_ESTIMATE);
  if (!p) throw InvariantError("fftw: 1d plan creation failed");
  cache.emplace(L, p);
  return p;
}

} // namespace detail

// out[i] = sum_j in[j] e(+ i j / L)   (unnormalized inverse DFT)
inline void fft_backward(FftBuf& in, FftBuf& out) {
  fftw_plan p = detail::plan_backward_1d(in.size());
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
}

} // namespace pex
