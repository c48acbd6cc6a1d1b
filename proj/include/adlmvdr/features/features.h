// adlmvdr/features/features.h
//
// Filter-estimator inputs: log-power spectrum of the reference channel,
// inter-channel phase differences, and the direction-guided feature that
// scores how well observed phase differences agree with a plane wave from
// the target DOA.

#ifndef ADLMVDR_FEATURES_FEATURES_H_
#define ADLMVDR_FEATURES_FEATURES_H_

#include <string>
#include <utility>
#include <vector>

#include "adlmvdr/base/ndarray.h"
#include "adlmvdr/signal/stft.h"
#include "adlmvdr/simulate/geometry.h"

namespace adlmvdr {

using MicPair = std::pair<size_t, size_t>;

inline constexpr double kLpsFloor = 1e-12;

enum class IpdEncoding { kAngle, kCosSin };

// Adjacent pairs (0,1), (1,2), ... plus (0, M-1) when M > 2.
std::vector<MicPair> DefaultPairs(size_t num_mics);

struct FeatureConfig {
  size_t ref_channel = 0;
  std::vector<MicPair> pairs;  // empty: DefaultPairs(M)
  IpdEncoding ipd_encoding = IpdEncoding::kAngle;
  bool use_lps = true;
  bool use_ipd = true;
  bool use_df = true;
};

struct FeatureBlock {
  std::string name;  // "lps", "ipd" or "df"
  size_t dim = 0;
  bool operator==(const FeatureBlock &) const = default;
};

struct FeatureLayout {
  std::vector<FeatureBlock> blocks;
  size_t TotalDim() const;
  bool operator==(const FeatureLayout &) const = default;
};

// [T, D] with the blocks concatenated in layout order.
struct FeatureTensor {
  RealArray data;
  FeatureLayout layout;
};

// log(|Y_ref|^2 + 1e-12), [T, F].
RealArray Lps(const Stft &spec, size_t ref_channel);

// Wrapped angle(Y_i) - angle(Y_j) in (-pi, pi], [T, P*F] (pair-major). With
// kCosSin each pair contributes cos then sin blocks: [T, 2*P*F].
RealArray Ipd(const Stft &spec, const std::vector<MicPair> &pairs,
              IpdEncoding encoding = IpdEncoding::kAngle);

// Mean over pairs of cos(IPD - TPD), TPD from a far-field plane wave at doa.
// Values lie in [-1, 1], [T, F].
RealArray DirectionalFeature(const Stft &spec, double doa, const ArrayGeometry &geometry,
                             const std::vector<MicPair> &pairs);

// Wraps to (-pi, pi].
double WrapAngle(double a);

FeatureLayout MakeLayout(const FeatureConfig &config, size_t num_mics, size_t num_bins);

FeatureTensor ComputeFeatures(const Stft &spec, double doa, const ArrayGeometry &geometry,
                              const FeatureConfig &config);

}  // namespace adlmvdr

#endif  // ADLMVDR_FEATURES_FEATURES_H_
