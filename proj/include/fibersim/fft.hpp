#pragma once

#include <complex>
#include <cstddef>
#include <new>
#include <span>
#include <vector>

namespace fibersim {

using cplx = std::complex<double>;

/// Allocator backed by fftw_malloc so that every working array shares the
/// same SIMD alignment. FFTW picks codelets by alignment, so this is what
/// makes repeated runs bit-identical.
template <class T>
struct FftwAllocator {
  using value_type = T;
  FftwAllocator() = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) noexcept {}
  T* allocate(std::size_t n);
  void deallocate(T* p, std::size_t) noexcept;
  template <class U>
  bool operator==(const FftwAllocator<U>&) const noexcept { return true; }
};

void* fftw_aligned_alloc(std::size_t bytes);
void fftw_aligned_free(void* p) noexcept;

template <class T>
T* FftwAllocator<T>::allocate(std::size_t n) {
  void* p = fftw_aligned_alloc(n * sizeof(T));
  if (!p) throw std::bad_alloc();
  return static_cast<T*>(p);
}

template <class T>
void FftwAllocator<T>::deallocate(T* p, std::size_t) noexcept {
  fftw_aligned_free(p);
}

using CVector = std::vector<cplx, FftwAllocator<cplx>>;
using RVector = std::vector<double, FftwAllocator<double>>;

/// Pair of 1-D complex transforms of fixed size.
///
/// Sign convention follows the optics envelope convention
/// A(t) = (1/n) sum_w S(w) exp(-i w t):
///   to_spectrum: S_j = sum_k A_k exp(+i w_j t_k)   (unnormalized)
///   to_time:     A_k = (1/n) sum_j S_j exp(-i w_j t_k)
/// so a round trip is the identity. Both accept in == out. One instance must
/// not be shared between threads.
class FftPair {
 public:
  explicit FftPair(std::size_t n);
  ~FftPair();
  FftPair(const FftPair&) = delete;
  FftPair& operator=(const FftPair&) = delete;
  FftPair(FftPair&& other) noexcept;
  FftPair& operator=(FftPair&& other) noexcept;

  std::size_t size() const { return n_; }

  void to_spectrum(std::span<const cplx> in, std::span<cplx> out) const;
  void to_time(std::span<const cplx> in, std::span<cplx> out) const;

 private:
  void execute(void* plan, std::span<const cplx> in, std::span<cplx> out) const;

  std::size_t n_ = 0;
  void* forward_ = nullptr;   // fftw_plan, FFTW_BACKWARD sign (+i)
  void* backward_ = nullptr;  // fftw_plan, FFTW_FORWARD sign (-i)
  mutable CVector scratch_in_;
  mutable CVector scratch_out_;
};

/// Real-input transform pair of size n with n/2 + 1 half-spectrum bins,
/// using FFTW's native sign (exp(-i w t) forward). Works on its own aligned
/// buffers: fill `real()`, call forward(), read `half()`, and the reverse.
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  std::span<double> real() { return real_; }
  std::span<cplx> half() { return half_; }

  void forward();
  /// Unnormalized; destroys the contents of half().
  void backward();

 private:
  std::size_t n_;
  RVector real_;
  CVector half_;
  void* forward_ = nullptr;
  void* backward_ = nullptr;
};

}  // namespace fibersim
