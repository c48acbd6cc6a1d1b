// adlmvdr/masking/masking.cc

#include "adlmvdr/masking/masking.h"

#include <cmath>

#include "adlmvdr/base/error.h"

namespace adlmvdr {

namespace {

void RequireMaskShape(const ComplexArray &mask, const Stft &spec, const char *who) {
  if (mask.rank() != 2 || mask.dim(0) != spec.NumFrames() ||
      mask.dim(1) != spec.NumBins())
    throw ShapeError(std::string(who) + ": mask shape " + ShapeString(mask.shape()) +
                     " does not match spectrogram frames x bins [" +
                     std::to_string(spec.NumFrames()) + ", " +
                     std::to_string(spec.NumBins()) + "]");
}

// sum_t |M(t, f)|^2 per bin.
std::vector<double> MaskPower(const CrMask &mask) {
  const size_t num_frames = mask.data.dim(0), num_bins = mask.data.dim(1);
  std::vector<double> out(num_bins, 0.0);
  for (size_t t = 0; t < num_frames; ++t)
    for (size_t f = 0; f < num_bins; ++f) out[f] += std::norm(mask.data(t, f));
  return out;
}

double Floored(double v, CovReport *report) {
  if (v < kCovNormFloor) {
    if (report) ++report->floored_bins;
    return kCovNormFloor;
  }
  return v;
}

}  // namespace

void CrFilter::Validate() const {
  if (data.rank() != 3 || data.dim(2) != NumTaps())
    throw ShapeError("CrFilter: expected [T, F, " + std::to_string(NumTaps()) +
                     "], got " + ShapeString(data.shape()));
}

Stft ApplyCrm(const CrMask &mask, const Stft &spec) {
  RequireMaskShape(mask.data, spec, "ApplyCrm");
  Stft out = spec;
  for (size_t m = 0; m < spec.NumChannels(); ++m)
    for (size_t t = 0; t < spec.NumFrames(); ++t)
      for (size_t f = 0; f < spec.NumBins(); ++f)
        out.data(m, t, f) = mask.data(t, f) * spec.data(m, t, f);
  return out;
}

Stft ApplyCrf(const CrFilter &filt, const Stft &spec) {
  filt.Validate();
  if (filt.data.dim(0) != spec.NumFrames() || filt.data.dim(1) != spec.NumBins())
    throw ShapeError("ApplyCrf: filter shape " + ShapeString(filt.data.shape()) +
                     " does not match spectrogram");
  const long num_frames = static_cast<long>(spec.NumFrames());
  const long num_bins = static_cast<long>(spec.NumBins());
  const long lt = static_cast<long>(filt.time_half);
  const long kf = static_cast<long>(filt.freq_half);
  Stft out = spec;
  for (auto &v : out.data.vec()) v = 0.0;
  for (size_t m = 0; m < spec.NumChannels(); ++m)
    for (long t = 0; t < num_frames; ++t)
      for (long f = 0; f < num_bins; ++f) {
        cdouble acc = 0.0;
        for (long dt = -lt; dt <= lt; ++dt) {
          const long ts = t + dt;
          if (ts < 0 || ts >= num_frames) continue;
          for (long df = -kf; df <= kf; ++df) {
            const long fs = f + df;
            if (fs < 0 || fs >= num_bins) continue;
            acc += filt.data(t, f, TapIndex(dt, df, filt.time_half, filt.freq_half)) *
                   spec.data(m, ts, fs);
          }
        }
        out.data(m, t, f) = acc;
      }
  return out;
}

CrMask CenterMask(const CrFilter &filt) {
  filt.Validate();
  const size_t num_frames = filt.data.dim(0), num_bins = filt.data.dim(1);
  CrMask mask{ComplexArray({num_frames, num_bins})};
  const size_t c = filt.CenterTap();
  for (size_t t = 0; t < num_frames; ++t)
    for (size_t f = 0; f < num_bins; ++f) mask.data(t, f) = filt.data(t, f, c);
  return mask;
}

UttCov UtteranceCov(const Stft &est, const CrMask &center_mask, CovReport *report) {
  RequireMaskShape(center_mask.data, est, "UtteranceCov");
  const size_t num_ch = est.NumChannels(), num_frames = est.NumFrames(),
               num_bins = est.NumBins();
  const std::vector<double> power = MaskPower(center_mask);
  UttCov cov{ComplexArray({num_bins, num_ch, num_ch})};
  for (size_t f = 0; f < num_bins; ++f) {
    const double inv = 1.0 / Floored(power[f], report);
    for (size_t i = 0; i < num_ch; ++i)
      for (size_t j = 0; j < num_ch; ++j) {
        cdouble acc = 0.0;
        for (size_t t = 0; t < num_frames; ++t)
          acc += est.data(i, t, f) * std::conj(est.data(j, t, f));
        cov.data(f, i, j) = acc * inv;
      }
  }
  return cov;
}

CovSeq FramewiseCov(const Stft &est, const CrMask &center_mask, bool per_frame_norm,
                    CovReport *report) {
  RequireMaskShape(center_mask.data, est, "FramewiseCov");
  const size_t num_ch = est.NumChannels(), num_frames = est.NumFrames(),
               num_bins = est.NumBins();
  const std::vector<double> power = MaskPower(center_mask);
  CovSeq cov{ComplexArray({num_frames, num_bins, num_ch, num_ch})};
  for (size_t t = 0; t < num_frames; ++t)
    for (size_t f = 0; f < num_bins; ++f) {
      const double norm =
          per_frame_norm ? std::norm(center_mask.data(t, f)) : power[f];
      const double inv = 1.0 / Floored(norm, report);
      for (size_t i = 0; i < num_ch; ++i)
        for (size_t j = 0; j < num_ch; ++j)
          cov.data(t, f, i, j) =
              est.data(i, t, f) * std::conj(est.data(j, t, f)) * inv;
    }
  return cov;
}

}  // namespace adlmvdr
