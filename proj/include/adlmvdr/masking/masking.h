// adlmvdr/masking/masking.h
//
// Complex ratio masks and filters, and the speech/noise spatial covariance
// estimates built from them. One mask (or filter) is shared by all channels.

#ifndef ADLMVDR_MASKING_MASKING_H_
#define ADLMVDR_MASKING_MASKING_H_

#include <cstddef>

#include "adlmvdr/base/ndarray.h"
#include "adlmvdr/signal/stft.h"

namespace adlmvdr {

// [T, F]
struct CrMask {
  ComplexArray data;
};

// Per-bin filter over the (2L+1) x (2K+1) neighbourhood, data [T, F, taps].
// Tap (dt, df), dt in [-L, L], df in [-K, K], sits at index
// (dt + L) * (2K + 1) + (df + K), so the centre tap is index taps / 2.
struct CrFilter {
  ComplexArray data;
  size_t time_half = 1;  // L
  size_t freq_half = 1;  // K

  size_t NumTaps() const { return (2 * time_half + 1) * (2 * freq_half + 1); }
  size_t CenterTap() const { return NumTaps() / 2; }
  void Validate() const;
};

inline size_t TapIndex(long dt, long df, size_t time_half, size_t freq_half) {
  return static_cast<size_t>((dt + static_cast<long>(time_half)) *
                                 static_cast<long>(2 * freq_half + 1) +
                             (df + static_cast<long>(freq_half)));
}

// [F, M, M]
struct UttCov {
  ComplexArray data;
};

// [T, F, M, M]
struct CovSeq {
  ComplexArray data;
};

inline constexpr double kCovNormFloor = 1e-10;

struct CovReport {
  size_t floored_bins = 0;  // normalizer below kCovNormFloor
};

// out_m(t, f) = mask(t, f) * Y_m(t, f)
Stft ApplyCrm(const CrMask &mask, const Stft &spec);

// out_m(t, f) = sum_{dt, df} F(t, f, tap(dt, df)) * Y_m(t + dt, f + df),
// with Y zero outside [0, T) x [0, F).
Stft ApplyCrf(const CrFilter &filt, const Stft &spec);

CrMask CenterMask(const CrFilter &filt);

// Phi(f) = sum_t S(t,f) S(t,f)^H / sum_t |M(t,f)|^2
UttCov UtteranceCov(const Stft &est, const CrMask &center_mask,
                    CovReport *report = nullptr);

// Phi(t,f) = S(t,f) S(t,f)^H / sum_t' |M(t',f)|^2. With per_frame_norm the
// denominator becomes |M(t,f)|^2 instead (ablation switch, off by default).
CovSeq FramewiseCov(const Stft &est, const CrMask &center_mask,
                    bool per_frame_norm = false, CovReport *report = nullptr);

}  // namespace adlmvdr

#endif  // ADLMVDR_MASKING_MASKING_H_
