// adlmvdr/signal/fft.cc

#include "adlmvdr/signal/fft.h"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace adlmvdr {

const RealFft &RealFft::Get(size_t n) {
  static std::mutex mu;
  static std::map<size_t, std::unique_ptr<RealFft>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto &slot = cache[n];
  if (!slot) slot = std::make_unique<RealFft>(n);
  return *slot;
}

RealFft::RealFft(size_t n) : n_(n) {
  if (n < 2 || n % 2 != 0)
    throw ShapeError("RealFft: size must be even and >= 2, got " +
                     std::to_string(n));
  // Planning with FFTW_ESTIMATE does not touch the arrays; the new-array
  // execute functions are used afterwards.
  double *rbuf = fftw_alloc_real(n);
  fftw_complex *cbuf = fftw_alloc_complex(n / 2 + 1);
  forward_plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), rbuf, cbuf,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
  inverse_plan_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), cbuf, rbuf,
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(rbuf);
  fftw_free(cbuf);
}

RealFft::~RealFft() {
  if (forward_plan_) fftw_destroy_plan(forward_plan_);
  if (inverse_plan_) fftw_destroy_plan(inverse_plan_);
}

void RealFft::Forward(std::span<const double> in, std::span<cdouble> out) const {
  if (in.size() != n_ || out.size() != num_bins())
    throw ShapeError("RealFft::Forward: size mismatch");
  std::vector<double> buf(in.begin(), in.end());
  fftw_execute_dft_r2c(forward_plan_, buf.data(),
                       reinterpret_cast<fftw_complex *>(out.data()));
}

void RealFft::Inverse(std::span<const cdouble> in, std::span<double> out) const {
  if (in.size() != num_bins() || out.size() != n_)
    throw ShapeError("RealFft::Inverse: size mismatch");
  // c2r destroys its input.
  std::vector<cdouble> buf(in.begin(), in.end());
  fftw_execute_dft_c2r(inverse_plan_, reinterpret_cast<fftw_complex *>(buf.data()),
                       out.data());
}

}  // namespace adlmvdr
