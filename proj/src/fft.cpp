#include "fibersim/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace fibersim {

namespace {
// The FFTW planner is not reentrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

void* fftw_aligned_alloc(std::size_t bytes) { return fftw_malloc(bytes == 0 ? 1 : bytes); }
void fftw_aligned_free(void* p) noexcept { fftw_free(p); }

FftPair::FftPair(std::size_t n) : n_(n), scratch_in_(n), scratch_out_(n) {
  if (n == 0) throw std::invalid_argument("FftPair: size must be positive");
  auto* in = reinterpret_cast<fftw_complex*>(scratch_in_.data());
  auto* out = reinterpret_cast<fftw_complex*>(scratch_out_.data());
  std::lock_guard lock(planner_mutex());
  forward_ = fftw_plan_dft_1d(static_cast<int>(n), in, out, FFTW_BACKWARD, FFTW_ESTIMATE);
  backward_ = fftw_plan_dft_1d(static_cast<int>(n), in, out, FFTW_FORWARD, FFTW_ESTIMATE);
  if (!forward_ || !backward_) throw std::runtime_error("FftPair: FFTW planning failed");
}

FftPair::~FftPair() {
  std::lock_guard lock(planner_mutex());
  if (forward_) fftw_destroy_plan(static_cast<fftw_plan>(forward_));
  if (backward_) fftw_destroy_plan(static_cast<fftw_plan>(backward_));
}

FftPair::FftPair(FftPair&& other) noexcept
    : n_(std::exchange(other.n_, 0)),
      forward_(std::exchange(other.forward_, nullptr)),
      backward_(std::exchange(other.backward_, nullptr)),
      scratch_in_(std::move(other.scratch_in_)),
      scratch_out_(std::move(other.scratch_out_)) {}

FftPair& FftPair::operator=(FftPair&& other) noexcept {
  if (this != &other) {
    std::swap(n_, other.n_);
    std::swap(forward_, other.forward_);
    std::swap(backward_, other.backward_);
    std::swap(scratch_in_, other.scratch_in_);
    std::swap(scratch_out_, other.scratch_out_);
  }
  return *this;
}

void FftPair::execute(void* plan, std::span<const cplx> in, std::span<cplx> out) const {
  if (in.size() != n_ || out.size() != n_) throw std::invalid_argument("FftPair: size mismatch");
  auto* src = reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data()));
  auto* dst = reinterpret_cast<fftw_complex*>(out.data());
  const int aligned = fftw_alignment_of(reinterpret_cast<double*>(scratch_in_.data()));
  if (src != dst && fftw_alignment_of(reinterpret_cast<double*>(src)) == aligned &&
      fftw_alignment_of(reinterpret_cast<double*>(dst)) == aligned) {
    fftw_execute_dft(static_cast<fftw_plan>(plan), src, dst);
    return;
  }
  // Plans are out-of-place; route aliased or foreign-aligned buffers through scratch.
  std::copy(in.begin(), in.end(), scratch_in_.begin());
  fftw_execute_dft(static_cast<fftw_plan>(plan), reinterpret_cast<fftw_complex*>(scratch_in_.data()),
                   reinterpret_cast<fftw_complex*>(scratch_out_.data()));
  std::copy(scratch_out_.begin(), scratch_out_.end(), out.begin());
}

void FftPair::to_spectrum(std::span<const cplx> in, std::span<cplx> out) const {
  execute(forward_, in, out);
}

void FftPair::to_time(std::span<const cplx> in, std::span<cplx> out) const {
  execute(backward_, in, out);
  const double scale = 1.0 / static_cast<double>(n_);
  for (auto& v : out) v *= scale;
}

RealFft::RealFft(std::size_t n) : n_(n), real_(n), half_(n / 2 + 1) {
  if (n < 2) throw std::invalid_argument("RealFft: size must be at least 2");
  std::lock_guard lock(planner_mutex());
  forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), real_.data(),
                                  reinterpret_cast<fftw_complex*>(half_.data()), FFTW_ESTIMATE);
  backward_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(half_.data()),
                                   real_.data(), FFTW_ESTIMATE);
  if (!forward_ || !backward_) throw std::runtime_error("RealFft: FFTW planning failed");
}

RealFft::~RealFft() {
  std::lock_guard lock(planner_mutex());
  if (forward_) fftw_destroy_plan(static_cast<fftw_plan>(forward_));
  if (backward_) fftw_destroy_plan(static_cast<fftw_plan>(backward_));
}

void RealFft::forward() { fftw_execute(static_cast<fftw_plan>(forward_)); }
void RealFft::backward() { fftw_execute(static_cast<fftw_plan>(backward_)); }

}  // namespace fibersim
