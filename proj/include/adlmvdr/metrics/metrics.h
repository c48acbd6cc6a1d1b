// adlmvdr/metrics/metrics.h
//
// Time-domain scores. Every score is clamped to +-60 dB.

#ifndef ADLMVDR_METRICS_METRICS_H_
#define ADLMVDR_METRICS_METRICS_H_

#include <cstddef>
#include <span>

namespace adlmvdr {

inline constexpr double kScoreClampDb = 60.0;

// Both signals are made zero-mean, then est is projected onto ref:
// s = (<est, ref> / |ref|^2) ref, e = est - s, score 10 log10(|s|^2 / |e|^2).
// Throws ShapeError on length mismatch, NumericError on a zero reference.
double SiSnr(std::span<const double> est, std::span<const double> ref);

// 10 log10(|ref|^2 / |est - ref|^2), no mean removal or rescaling.
double Snr(std::span<const double> est, std::span<const double> ref);

// Projection SDR: a least-squares FIR of filter_len taps maps ref onto est,
// and est is then scored against the filtered reference like SiSnr.
// filter_len = 1 is SiSnr.
double SdrProj(std::span<const double> est, std::span<const double> ref,
               size_t filter_len = 512);

}  // namespace adlmvdr

#endif  // ADLMVDR_METRICS_METRICS_H_
