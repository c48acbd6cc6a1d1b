// adlmvdr/features/features.cc

#include "adlmvdr/features/features.h"

#include <cmath>
#include <numbers>

#include "adlmvdr/base/error.h"

namespace adlmvdr {

namespace {

void CheckPairs(const std::vector<MicPair> &pairs, size_t num_mics) {
  if (pairs.empty()) throw ConfigError("features: no microphone pairs");
  for (const auto &[i, j] : pairs)
    if (i >= num_mics || j >= num_mics || i == j)
      throw ConfigError("features: invalid pair (" + std::to_string(i) + ", " +
                        std::to_string(j) + ") for " + std::to_string(num_mics) +
                        " mics");
}

double BinHz(const Stft &spec, size_t f) {
  return static_cast<double>(f) * spec.rate / static_cast<double>(spec.config.fft_size);
}

}  // namespace

std::vector<MicPair> DefaultPairs(size_t num_mics) {
  std::vector<MicPair> pairs;
  for (size_t m = 0; m + 1 < num_mics; ++m) pairs.emplace_back(m, m + 1);
  if (num_mics > 2) pairs.emplace_back(0, num_mics - 1);
  return pairs;
}

double WrapAngle(double a) {
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

size_t FeatureLayout::TotalDim() const {
  size_t d = 0;
  for (const auto &b : blocks) d += b.dim;
  return d;
}

RealArray Lps(const Stft &spec, size_t ref_channel) {
  if (ref_channel >= spec.NumChannels())
    throw ConfigError("Lps: reference channel out of range");
  RealArray out({spec.NumFrames(), spec.NumBins()});
  for (size_t t = 0; t < spec.NumFrames(); ++t)
    for (size_t f = 0; f < spec.NumBins(); ++f)
      out(t, f) = std::log(std::norm(spec.data(ref_channel, t, f)) + kLpsFloor);
  return out;
}

RealArray Ipd(const Stft &spec, const std::vector<MicPair> &pairs, IpdEncoding encoding) {
  CheckPairs(pairs, spec.NumChannels());
  const size_t num_frames = spec.NumFrames(), num_bins = spec.NumBins();
  const size_t per_pair = encoding == IpdEncoding::kAngle ? num_bins : 2 * num_bins;
  RealArray out({num_frames, pairs.size() * per_pair});
  for (size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    for (size_t t = 0; t < num_frames; ++t)
      for (size_t f = 0; f < num_bins; ++f) {
        const double a =
            WrapAngle(std::arg(spec.data(i, t, f) * std::conj(spec.data(j, t, f))));
        if (encoding == IpdEncoding::kAngle) {
          out(t, p * per_pair + f) = a;
        } else {
          out(t, p * per_pair + f) = std::cos(a);
          out(t, p * per_pair + num_bins + f) = std::sin(a);
        }
      }
  }
  return out;
}

RealArray DirectionalFeature(const Stft &spec, double doa, const ArrayGeometry &geometry,
                             const std::vector<MicPair> &pairs) {
  CheckPairs(pairs, spec.NumChannels());
  if (geometry.NumMics() != spec.NumChannels())
    throw ConfigError("DirectionalFeature: geometry has " +
                      std::to_string(geometry.NumMics()) + " mics, spectrogram has " +
                      std::to_string(spec.NumChannels()));
  const size_t num_frames = spec.NumFrames(), num_bins = spec.NumBins();
  RealArray tpd({pairs.size(), num_bins});
  for (size_t p = 0; p < pairs.size(); ++p)
    for (size_t f = 0; f < num_bins; ++f)
      tpd(p, f) = geometry.TargetPhaseDifference(pairs[p].first, pairs[p].second, doa,
                                                 BinHz(spec, f));
  const double inv = 1.0 / static_cast<double>(pairs.size());
  RealArray out({num_frames, num_bins});
  for (size_t t = 0; t < num_frames; ++t)
    for (size_t f = 0; f < num_bins; ++f) {
      double acc = 0.0;
      for (size_t p = 0; p < pairs.size(); ++p) {
        const auto [i, j] = pairs[p];
        const double ipd = std::arg(spec.data(i, t, f) * std::conj(spec.data(j, t, f)));
        acc += std::cos(ipd - tpd(p, f));
      }
      out(t, f) = acc * inv;
    }
  return out;
}

FeatureLayout MakeLayout(const FeatureConfig &config, size_t num_mics, size_t num_bins) {
  const size_t num_pairs =
      config.pairs.empty() ? DefaultPairs(num_mics).size() : config.pairs.size();
  FeatureLayout layout;
  if (config.use_lps) layout.blocks.push_back({"lps", num_bins});
  if (config.use_ipd) {
    const size_t per = config.ipd_encoding == IpdEncoding::kAngle ? 1 : 2;
    layout.blocks.push_back({"ipd", per * num_pairs * num_bins});
  }
  if (config.use_df) layout.blocks.push_back({"df", num_bins});
  if (layout.blocks.empty()) throw ConfigError("features: all blocks disabled");
  return layout;
}

FeatureTensor ComputeFeatures(const Stft &spec, double doa, const ArrayGeometry &geometry,
                              const FeatureConfig &config) {
  const std::vector<MicPair> pairs =
      config.pairs.empty() ? DefaultPairs(spec.NumChannels()) : config.pairs;
  FeatureTensor out;
  out.layout = MakeLayout(config, spec.NumChannels(), spec.NumBins());
  std::vector<RealArray> parts;
  if (config.use_lps) parts.push_back(Lps(spec, config.ref_channel));
  if (config.use_ipd) parts.push_back(Ipd(spec, pairs, config.ipd_encoding));
  if (config.use_df) parts.push_back(DirectionalFeature(spec, doa, geometry, pairs));

  const size_t num_frames = spec.NumFrames();
  out.data = RealArray({num_frames, out.layout.TotalDim()});
  for (size_t t = 0; t < num_frames; ++t) {
    size_t off = 0;
    for (const auto &part : parts) {
      const size_t d = part.dim(1);
      for (size_t k = 0; k < d; ++k) out.data(t, off + k) = part(t, k);
      off += d;
    }
  }
  return out;
}

}  // namespace adlmvdr
