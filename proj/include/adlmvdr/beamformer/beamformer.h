// adlmvdr/beamformer/beamformer.h
//
// MVDR weights (utterance-level and multi-tap), the frame-wise weights
// composed from estimated inverse noise covariances and steering vectors,
// and weight application h^H Y.

#ifndef ADLMVDR_BEAMFORMER_BEAMFORMER_H_
#define ADLMVDR_BEAMFORMER_BEAMFORMER_H_

#include <cstddef>
#include <vector>

#include "adlmvdr/base/ndarray.h"
#include "adlmvdr/linalg/cmat.h"
#include "adlmvdr/masking/masking.h"
#include "adlmvdr/signal/stft.h"

namespace adlmvdr {

// [F, D], D = M or taps * M.
struct BeamWeightsUtt {
  ComplexArray data;
};

// [T, F, M]
struct BeamWeightsFrame {
  ComplexArray data;
};

inline constexpr double kSteeringNormFloor = 1e-10;
inline constexpr double kAdlDenominatorFloor = 1e-10;

struct BeamformerReport {
  size_t cholesky_fallbacks = 0;
  size_t floored_denominators = 0;
  size_t eig_failures = 0;
};

// h(f) = x / (v^H x) with x = (Phi_NN(f) + lambda I)^{-1} v(f).
// steer is [F, D]. Throws NumericError naming the bin when |v(f)| < 1e-10.
BeamWeightsUtt MvdrWeights(const UttCov &phi_nn, const ComplexArray &steer,
                           double eps_rel = kDefaultLoadingRel,
                           BeamformerReport *report = nullptr);

enum class SteeringGauge {
  kUnitNorm,      // unit norm, largest-modulus entry real positive
  kReferenceRtf,  // divided by the reference entry (relative transfer function)
};

// Principal eigenvector of each Phi_SS(f), [F, M]. With kReferenceRtf the
// vector is v / v[ref]; bins whose reference entry vanishes keep the unit-norm
// gauge. Non-convergent bins are retried with a relaxed tolerance and, failing
// that, raise ConvergenceError naming the bin.
ComplexArray SteeringFromCov(const UttCov &phi_ss,
                             SteeringGauge gauge = SteeringGauge::kReferenceRtf,
                             size_t ref_channel = 0,
                             BeamformerReport *report = nullptr);

// Stacks the spectrogram with copies delayed by 1..taps-1 frames along the
// channel axis: channel d*M + m holds Y_m(t - d), zero for t < d.
Stft MultitapExpand(const Stft &spec, size_t taps);

// [F, M] -> [F, taps*M] with zeros on the delayed taps.
ComplexArray ExpandSteering(const ComplexArray &steer, size_t taps);

// h(t,f) = P(t,f) v(t,f) / (v^H P v), P = estimated inverse noise covariance
// [T, F, M, M], steer [T, F, M]. Denominators with modulus below 1e-10 are
// rescaled to that modulus (phase kept) and counted.
BeamWeightsFrame AdlWeights(const ComplexArray &phi_nn_inv, const ComplexArray &steer,
                            BeamformerReport *report = nullptr);

// Single-channel output [1, T, F]: h^H(f) Y(t,f) or h^H(t,f) Y(t,f).
Stft ApplyWeights(const BeamWeightsUtt &w, const Stft &spec);
Stft ApplyWeights(const BeamWeightsFrame &w, const Stft &spec);

// Oracle baseline: MVDR from the true speech image (target) and the true
// noise-plus-interference image (mixture - target), each averaged over the
// whole utterance, with the steering vector taken from the speech
// covariance. Returns the enhanced reference-channel waveform.
std::vector<double> OracleMvdr(const MultiWave &mixture, const MultiWave &target,
                               const StftConfig &config, size_t ref_channel = 0,
                               BeamformerReport *report = nullptr);

}  // namespace adlmvdr

#endif  // ADLMVDR_BEAMFORMER_BEAMFORMER_H_
