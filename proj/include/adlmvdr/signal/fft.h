// adlmvdr/signal/fft.h

#ifndef ADLMVDR_SIGNAL_FFT_H_
#define ADLMVDR_SIGNAL_FFT_H_

#include <cstddef>
#include <span>

#include "adlmvdr/base/ndarray.h"

struct fftw_plan_s;

namespace adlmvdr {

// Real-input FFT of a fixed size backed by FFTW. Forward is unnormalized
// (X_k = sum_n x_n e^{-2 pi i k n / N}); Inverse is the unnormalized c2r
// transform, so Inverse(Forward(x)) = N * x. Imaginary parts of the DC and
// Nyquist bins are ignored by Inverse.
class RealFft {
 public:
  // Shared, lazily planned instance for size n. Not thread-safe on first use
  // for a given size; afterwards Forward/Inverse are reentrant.
  static const RealFft &Get(size_t n);

  explicit RealFft(size_t n);
  ~RealFft();
  RealFft(const RealFft &) = delete;
  RealFft &operator=(const RealFft &) = delete;

  size_t size() const { return n_; }
  size_t num_bins() const { return n_ / 2 + 1; }

  void Forward(std::span<const double> in, std::span<cdouble> out) const;
  void Inverse(std::span<const cdouble> in, std::span<double> out) const;

 private:
  size_t n_;
  fftw_plan_s *forward_plan_ = nullptr;
  fftw_plan_s *inverse_plan_ = nullptr;
};

}  // namespace adlmvdr

#endif  // ADLMVDR_SIGNAL_FFT_H_
