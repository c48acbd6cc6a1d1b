// adlmvdr/beamformer/beamformer.cc

#include "adlmvdr/beamformer/beamformer.h"

#include <cmath>

#include "adlmvdr/base/error.h"

namespace adlmvdr {

namespace {

bool Finite(cdouble v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

Stft SingleChannelLike(const Stft &spec) {
  Stft out;
  out.config = spec.config;
  out.signal_len = spec.signal_len;
  out.rate = spec.rate;
  out.data = ComplexArray({1, spec.NumFrames(), spec.NumBins()});
  return out;
}

}  // namespace

BeamWeightsUtt MvdrWeights(const UttCov &phi_nn, const ComplexArray &steer,
                           double eps_rel, BeamformerReport *report) {
  const auto &phi = phi_nn.data;
  if (phi.rank() != 3 || phi.dim(1) != phi.dim(2))
    throw ShapeError("MvdrWeights: Phi_NN must be [F, D, D]");
  const size_t num_bins = phi.dim(0), dim = phi.dim(1);
  if (steer.rank() != 2 || steer.dim(0) != num_bins || steer.dim(1) != dim)
    throw ShapeError("MvdrWeights: steering must be [F, D] matching Phi_NN");

  BeamWeightsUtt w{ComplexArray({num_bins, dim})};
  for (size_t f = 0; f < num_bins; ++f) {
    const CVec v(&steer(f, 0), &steer(f, 0) + dim);
    if (Norm(v) < kSteeringNormFloor)
      throw NumericError("MvdrWeights: degenerate steering vector at bin " +
                         std::to_string(f));
    LoadingReport lr;
    const CVec x = SolveLoaded(CMat::FromSquare(&phi(f, 0, 0), dim), v, eps_rel, &lr);
    if (report && lr.cholesky_failed) ++report->cholesky_fallbacks;
    const cdouble den = Dot(v, x);
    for (size_t d = 0; d < dim; ++d) w.data(f, d) = x[d] / den;
  }
  return w;
}

ComplexArray SteeringFromCov(const UttCov &phi_ss, SteeringGauge gauge,
                             size_t ref_channel, BeamformerReport *report) {
  const auto &phi = phi_ss.data;
  if (phi.rank() != 3 || phi.dim(1) != phi.dim(2))
    throw ShapeError("SteeringFromCov: Phi_SS must be [F, M, M]");
  const size_t num_bins = phi.dim(0), dim = phi.dim(1);
  if (ref_channel >= dim) throw ShapeError("SteeringFromCov: bad reference channel");

  ComplexArray steer({num_bins, dim});
  for (size_t f = 0; f < num_bins; ++f) {
    const CMat a = CMat::FromSquare(&phi(f, 0, 0), dim);
    CVec v;
    try {
      v = PrincipalEigvec(a);
    } catch (const ConvergenceError &) {
      if (report) ++report->eig_failures;
      try {
        v = PrincipalEigvec(a, {.tol = 1e-5, .max_iter = 400, .squarings = 6});
      } catch (const ConvergenceError &e) {
        throw ConvergenceError("SteeringFromCov: bin " + std::to_string(f) + ": " +
                               e.what());
      }
    }
    if (gauge == SteeringGauge::kReferenceRtf &&
        std::abs(v[ref_channel]) > kSteeringNormFloor) {
      const cdouble r = v[ref_channel];
      for (auto &x : v) x /= r;
    }
    for (size_t m = 0; m < dim; ++m) steer(f, m) = v[m];
  }
  return steer;
}

Stft MultitapExpand(const Stft &spec, size_t taps) {
  if (taps < 1) throw ShapeError("MultitapExpand: taps must be >= 1");
  const size_t num_ch = spec.NumChannels(), num_frames = spec.NumFrames(),
               num_bins = spec.NumBins();
  Stft out = spec;
  out.data = ComplexArray({taps * num_ch, num_frames, num_bins});
  for (size_t d = 0; d < taps; ++d)
    for (size_t m = 0; m < num_ch; ++m)
      for (size_t t = d; t < num_frames; ++t)
        for (size_t f = 0; f < num_bins; ++f)
          out.data(d * num_ch + m, t, f) = spec.data(m, t - d, f);
  return out;
}

ComplexArray ExpandSteering(const ComplexArray &steer, size_t taps) {
  if (taps < 1) throw ShapeError("ExpandSteering: taps must be >= 1");
  const size_t num_bins = steer.dim(0), dim = steer.dim(1);
  ComplexArray out({num_bins, taps * dim});
  for (size_t f = 0; f < num_bins; ++f)
    for (size_t m = 0; m < dim; ++m) out(f, m) = steer(f, m);
  return out;
}

BeamWeightsFrame AdlWeights(const ComplexArray &phi_nn_inv, const ComplexArray &steer,
                            BeamformerReport *report) {
  if (phi_nn_inv.rank() != 4 || phi_nn_inv.dim(2) != phi_nn_inv.dim(3))
    throw ShapeError("AdlWeights: inverse covariance must be [T, F, M, M]");
  const size_t num_frames = phi_nn_inv.dim(0), num_bins = phi_nn_inv.dim(1),
               dim = phi_nn_inv.dim(2);
  if (steer.rank() != 3 || steer.dim(0) != num_frames || steer.dim(1) != num_bins ||
      steer.dim(2) != dim)
    throw ShapeError("AdlWeights: steering must be [T, F, M] matching");

  BeamWeightsFrame w{ComplexArray({num_frames, num_bins, dim})};
  CVec x(dim);
  for (size_t t = 0; t < num_frames; ++t)
    for (size_t f = 0; f < num_bins; ++f) {
      const cdouble *p = &phi_nn_inv(t, f, 0, 0);
      const cdouble *v = &steer(t, f, 0);
      cdouble den = 0.0;
      for (size_t i = 0; i < dim; ++i) {
        cdouble s = 0.0;
        for (size_t j = 0; j < dim; ++j) s += p[i * dim + j] * v[j];
        x[i] = s;
        den += std::conj(v[i]) * s;
      }
      if (!Finite(den))
        throw NumericError("AdlWeights: non-finite value at (t=" + std::to_string(t) +
                           ", f=" + std::to_string(f) + ")");
      const double mag = std::abs(den);
      if (mag < kAdlDenominatorFloor) {
        if (report) ++report->floored_denominators;
        den = mag > 0.0 ? den * (kAdlDenominatorFloor / mag)
                        : cdouble(kAdlDenominatorFloor);
      }
      for (size_t i = 0; i < dim; ++i) w.data(t, f, i) = x[i] / den;
    }
  return w;
}

Stft ApplyWeights(const BeamWeightsUtt &w, const Stft &spec) {
  if (w.data.rank() != 2 || w.data.dim(0) != spec.NumBins() ||
      w.data.dim(1) != spec.NumChannels())
    throw ShapeError("ApplyWeights: weights " + ShapeString(w.data.shape()) +
                     " do not match spectrogram " + ShapeString(spec.data.shape()));
  Stft out = SingleChannelLike(spec);
  for (size_t t = 0; t < spec.NumFrames(); ++t)
    for (size_t f = 0; f < spec.NumBins(); ++f) {
      cdouble s = 0.0;
      for (size_t m = 0; m < spec.NumChannels(); ++m)
        s += std::conj(w.data(f, m)) * spec.data(m, t, f);
      out.data(0, t, f) = s;
    }
  return out;
}

Stft ApplyWeights(const BeamWeightsFrame &w, const Stft &spec) {
  if (w.data.rank() != 3 || w.data.dim(0) != spec.NumFrames() ||
      w.data.dim(1) != spec.NumBins() || w.data.dim(2) != spec.NumChannels())
    throw ShapeError("ApplyWeights: weights " + ShapeString(w.data.shape()) +
                     " do not match spectrogram " + ShapeString(spec.data.shape()));
  Stft out = SingleChannelLike(spec);
  for (size_t t = 0; t < spec.NumFrames(); ++t)
    for (size_t f = 0; f < spec.NumBins(); ++f) {
      cdouble s = 0.0;
      for (size_t m = 0; m < spec.NumChannels(); ++m)
        s += std::conj(w.data(t, f, m)) * spec.data(m, t, f);
      out.data(0, t, f) = s;
    }
  return out;
}

std::vector<double> OracleMvdr(const MultiWave &mixture, const MultiWave &target,
                               const StftConfig &config, size_t ref_channel,
                               BeamformerReport *report) {
  if (mixture.NumChannels() != target.NumChannels() ||
      mixture.NumSamples() != target.NumSamples())
    throw ShapeError("OracleMvdr: mixture and target images differ in shape");
  MultiWave noise = mixture;
  for (size_t m = 0; m < noise.NumChannels(); ++m)
    for (size_t n = 0; n < noise.NumSamples(); ++n) noise.channels[m][n] -= target.channels[m][n];
  const Stft y = ForwardStft(mixture, config);
  const CrMask ones{ComplexArray({y.NumFrames(), y.NumBins()}, cdouble(1.0, 0.0))};
  const UttCov phi_ss = UtteranceCov(ForwardStft(target, config), ones);
  const UttCov phi_nn = UtteranceCov(ForwardStft(noise, config), ones);
  const ComplexArray steer =
      SteeringFromCov(phi_ss, SteeringGauge::kReferenceRtf, ref_channel, report);
  const Stft out = ApplyWeights(MvdrWeights(phi_nn, steer, kDefaultLoadingRel, report), y);
  return InverseStft(out, config).channels[0];
}

}  // namespace adlmvdr
