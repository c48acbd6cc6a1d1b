// adlmvdr/neural/graph_dsp.h
//
// Differentiable versions of the masking, covariance, MVDR and iSTFT steps,
// plus the Si-SNR training loss. Spectrograms enter as constants laid out
// [M, T, F]; network outputs enter as tensors.
#ifndef ADLMVDR_NEURAL_GRAPH_DSP_H_
#define ADLMVDR_NEURAL_GRAPH_DSP_H_

#include <span>

#include "adlmvdr/linalg/cmat.h"
#include "adlmvdr/neural/complex.h"
#include "adlmvdr/signal/stft.h"

namespace adlmvdr::nn {

// Events worth watching during joint training. Counts accumulate.
struct GraphReport {
  size_t cov_floored_bins = 0;       // mask-power normalizer below 1e-10
  size_t loading_floor_hits = 0;     // loading lambda fell back to 1e-10
  size_t cholesky_fallbacks = 0;     // loaded matrix not numerically PD
  size_t eig_retries = 0;            // power iteration needed relaxed settings
  size_t small_eigengaps = 0;        // gap below 1e-8 of the top eigenvalue
  size_t floored_denominators = 0;   // |v^H P v| below 1e-10
  GraphReport &operator+=(const GraphReport &o);
};

// filter [T, F, taps] applied to y [M, T, F]; returns [M, T, F].
CTensor ApplyCrfGraph(const CTensor &filter, const ComplexArray &y, size_t time_half,
                      size_t freq_half);
// [T, F] centre tap of a [T, F, taps] filter.
CTensor CenterTapGraph(const CTensor &filter);

// est [M, T, F], mask [T, F] -> [T, F, M, M], Phi(t,f) = S S^H / sum_t |M|^2.
CTensor FramewiseCovGraph(const CTensor &est, const CTensor &mask, bool per_frame_norm = false,
                          GraphReport *report = nullptr);
// -> [F, M, M], Phi(f) = sum_t S S^H / sum_t |M|^2.
CTensor UtteranceCovGraph(const CTensor &est, const CTensor &mask,
                          GraphReport *report = nullptr);

// (sym(a) + lambda I)^{-1} b per bin; a [F, D, D], b [F, D].
CTensor SolveLoadedGraph(const CTensor &a, const CTensor &b,
                         double eps_rel = kDefaultLoadingRel, GraphReport *report = nullptr);
// Principal eigenvector of sym(phi) per bin in the RTF gauge v / v[ref];
// phi [F, M, M] -> [F, M]. The backward pass uses the eigenvector
// perturbation formula, which blows up as the eigengap closes.
CTensor SteeringGraph(const CTensor &phi, size_t ref_channel = 0,
                      GraphReport *report = nullptr);

// h(f) = x / (v^H x), x = solve(phi_nn, v); phi_nn [F, D, D], steer [F, D].
CTensor MvdrWeightsGraph(const CTensor &phi_nn, const CTensor &steer,
                         double eps_rel = kDefaultLoadingRel, GraphReport *report = nullptr);
// h(t,f) = P v / (v^H P v) with the denominator modulus floored at 1e-10;
// p [T, F, M, M], steer [T, F, M] -> [T, F, M].
CTensor AdlWeightsGraph(const CTensor &p, const CTensor &steer, GraphReport *report = nullptr);
// Rescales entries with modulus below floor to that modulus, phase kept.
CTensor FloorModulus(const CTensor &z, double floor, size_t *count = nullptr);

// h^H Y with h [F, D] or [T, F, D] and y [D, T, F] -> [T, F].
CTensor ApplyWeightsGraph(const CTensor &h, const ComplexArray &y);
// [M, T, F] -> [taps * M, T, F], channel d*M + m holds est_m(t - d).
CTensor MultitapExpandGraph(const CTensor &est, size_t taps);

// spec [T, F] -> waveform [signal_len].
Tensor IstftGraph(const CTensor &spec, const StftConfig &config, size_t signal_len);

// -SiSnr(est, ref) with the same centring, projection and +-60 dB clamp as
// the metric. Throws NumericError on a silent reference.
Tensor SiSnrLoss(const Tensor &est, std::span<const double> ref);

}  // namespace adlmvdr::nn

#endif  // ADLMVDR_NEURAL_GRAPH_DSP_H_
