// train/system.cc

#include "adlmvdr/train/system.h"

#include <cmath>

#include "adlmvdr/base/error.h"
#include "adlmvdr/beamformer/beamformer.h"
#include "adlmvdr/signal/wav.h"

namespace adlmvdr {

using namespace nn;

std::vector<Utterance> LoadUtterances(const std::filesystem::path &manifest, size_t num_mics) {
  const auto dir = manifest.parent_path();
  std::vector<Utterance> out;
  for (const auto &e : ReadManifest(manifest)) {
    if (e.num_mics != num_mics)
      throw ConfigError("manifest " + manifest.string() + ": scene " + e.id + " has " +
                        std::to_string(e.num_mics) + " mics, model expects " +
                        std::to_string(num_mics));
    Utterance u;
    u.id = e.id;
    u.mixture = ReadWav((dir / e.mixture).string());
    const MultiWave ref = ReadWav((dir / e.reference).string());
    if (u.mixture.NumChannels() != num_mics || ref.NumSamples() != u.mixture.NumSamples())
      throw FormatError("scene " + e.id + ": mixture/reference files disagree with the manifest");
    u.reference = ref.channels[kReferenceChannel];
    u.doa = e.scene.target_doa;
    out.push_back(std::move(u));
  }
  return out;
}

Example MakeExample(const Utterance &u, const ModelConfig &config, size_t offset, size_t length) {
  const size_t total = u.mixture.NumSamples();
  if (offset > total) throw ShapeError("example offset beyond utterance " + u.id);
  if (length == 0 || offset + length > total) length = total - offset;
  MultiWave seg(u.mixture.NumChannels(), length, u.mixture.rate);
  for (size_t m = 0; m < seg.NumChannels(); ++m)
    std::copy_n(u.mixture.channels[m].begin() + static_cast<long>(offset), length,
                seg.channels[m].begin());
  Example ex;
  ex.id = u.id;
  ex.doa = u.doa;
  ex.mix = ForwardStft(seg, config.stft);
  if (!u.reference.empty())
    ex.reference.assign(u.reference.begin() + static_cast<long>(offset),
                        u.reference.begin() + static_cast<long>(offset + length));
  const auto geom = ArrayGeometry::UniformLinear(config.num_mics, config.mic_spacing);
  FeatureTensor f = ComputeFeatures(ex.mix, u.doa, geom, config.features);
  ex.features = Tensor::Constant(f.data.shape(), std::move(f.data.vec()));
  return ex;
}

namespace {

// Output layer of a GRU-Net pinned near a fixed target: bias = target and
// weights scaled down, so the network starts close to a known estimate
// while every parameter still receives gradient.
void IdentityInit(ParamStore &store, const std::string &prefix, const std::vector<double> &target) {
  Tensor w = store.Get(prefix + ".fc.w"), b = store.Get(prefix + ".fc.b");
  for (double &v : w.mutable_value()) v *= 0.1;
  b.mutable_value() = target;
}

ComplexArray ChannelOf(const ComplexArray &y, size_t m) {
  const size_t t_n = y.dim(1), f_n = y.dim(2);
  ComplexArray out({1, t_n, f_n});
  std::copy_n(&y(m, 0, 0), t_n * f_n, out.data());
  return out;
}

}  // namespace

System::System(const ModelConfig &config, uint64_t seed)
    : config_(config),
      geometry_(ArrayGeometry::UniformLinear(config.num_mics, config.mic_spacing)) {
  config_.Finalize();
  std::mt19937_64 rng(seed);
  const size_t d = MakeLayout(config_.features, config_.num_mics, config_.NumBins()).TotalDim();
  estimator_ = FilterEstimator("est", d, config_.estimator, store_, rng);
  if (config_.variant == Variant::kAdlMvdr) {
    const size_t m = config_.num_mics, in = 2 * m * m;
    vnet_ = GruNet("vnet", in, config_.steering_net, store_, rng);
    inet_ = GruNet("inet", in, config_.inverse_net, store_, rng);
    if (config_.grunet_identity_init) {
      std::vector<double> v(2 * m, 0.0), p(2 * m * m, 0.0);
      v[config_.features.ref_channel] = 1.0;
      for (size_t i = 0; i < m; ++i) p[i * m + i] = 1.0;
      IdentityInit(store_, "vnet", v);
      IdentityInit(store_, "inet", p);
    }
  }
}

std::vector<std::string> System::Groups() const {
  if (config_.variant == Variant::kAdlMvdr) return {"est", "vnet", "inet"};
  return {"est"};
}

System::Output System::Forward(const Example &ex) const {
  const size_t m_n = config_.num_mics, ref = config_.features.ref_channel;
  if (ex.mix.NumChannels() != m_n || ex.mix.NumBins() != config_.NumBins())
    throw ShapeError("example " + ex.id + " has " + std::to_string(ex.mix.NumChannels()) +
                     " channels and " + std::to_string(ex.mix.NumBins()) +
                     " bins; the model expects " + std::to_string(m_n) + " and " +
                     std::to_string(config_.NumBins()));
  const size_t L = config_.time_half, K = config_.freq_half;
  const ComplexArray &y = ex.mix.data;
  const size_t t_n = ex.mix.NumFrames(), f_n = ex.mix.NumBins();

  Output out;
  GraphReport &rep = out.report;
  const FilterPair fp = estimator_.Forward(ex.features);
  CTensor enhanced;  // [T, F]

  switch (config_.variant) {
    case Variant::kNnCrm:
    case Variant::kNnCrf:
      enhanced = CReshape(ApplyCrfGraph(fp.speech, ChannelOf(y, ref), L, K), {t_n, f_n});
      break;
    case Variant::kMvdrCrm:
    case Variant::kMvdrCrf:
    case Variant::kMultitapMvdr: {
      const CTensor s = ApplyCrfGraph(fp.speech, y, L, K);
      const CTensor n = ApplyCrfGraph(fp.noise, y, L, K);
      const CTensor phi_ss = UtteranceCovGraph(s, CenterTapGraph(fp.speech), &rep);
      CTensor steer = SteeringGraph(phi_ss, ref, &rep);
      if (config_.variant == Variant::kMultitapMvdr) {
        const size_t taps = config_.taps;
        const CTensor phi_nn =
            UtteranceCovGraph(MultitapExpandGraph(n, taps), CenterTapGraph(fp.noise), &rep);
        const size_t pad = (taps - 1) * m_n;
        steer = CConcat({steer, {Tensor::Zeros({f_n, pad}), Tensor::Zeros({f_n, pad})}}, 1);
        const CTensor h = MvdrWeightsGraph(phi_nn, steer, config_.loading_eps, &rep);
        enhanced = ApplyWeightsGraph(h, MultitapExpand(ex.mix, taps).data);
      } else {
        const CTensor phi_nn = UtteranceCovGraph(n, CenterTapGraph(fp.noise), &rep);
        const CTensor h = MvdrWeightsGraph(phi_nn, steer, config_.loading_eps, &rep);
        enhanced = ApplyWeightsGraph(h, y);
      }
      break;
    }
    case Variant::kAdlMvdr: {
      const CTensor s = ApplyCrfGraph(fp.speech, y, L, K);
      const CTensor n = ApplyCrfGraph(fp.noise, y, L, K);
      const CTensor phi_ss =
          FramewiseCovGraph(s, CenterTapGraph(fp.speech), config_.per_frame_norm, &rep);
      const CTensor phi_nn =
          FramewiseCovGraph(n, CenterTapGraph(fp.noise), config_.per_frame_norm, &rep);
      const CTensor steer = GruNetSteering(vnet_, phi_ss);
      const CTensor inv = GruNetInverse(inet_, phi_nn);
      enhanced = ApplyWeightsGraph(AdlWeightsGraph(inv, steer, &rep), y);
      break;
    }
  }
  out.wave = IstftGraph(enhanced, config_.stft, ex.mix.signal_len);
  return out;
}

std::vector<double> System::Enhance(const MultiWave &mixture, double doa) const {
  if (mixture.NumChannels() != config_.num_mics)
    throw ShapeError("mixture has " + std::to_string(mixture.NumChannels()) +
                     " channels; the model expects " + std::to_string(config_.num_mics));
  NoGradGuard guard;
  Utterance u{"input", mixture, {}, doa};
  return Forward(MakeExample(u, config_)).wave.value();
}

Checkpoint System::ToCheckpoint() const {
  nlohmann::json echo = ModelConfigToJson(config_);
  nlohmann::json layout = nlohmann::json::array();
  for (const auto &b : MakeLayout(config_.features, config_.num_mics, config_.NumBins()).blocks)
    layout.push_back({{"name", b.name}, {"dim", b.dim}});
  echo["derived"] = {{"num_bins", config_.NumBins()},
                     {"num_taps", config_.estimator.NumTaps()},
                     {"feature_layout", layout}};
  return Snapshot(store_, echo.dump());
}

System LoadSystem(const std::filesystem::path &checkpoint) {
  const Checkpoint ckpt = LoadCheckpoint(checkpoint);
  nlohmann::json echo;
  try {
    echo = nlohmann::json::parse(ckpt.config_json);
  } catch (const nlohmann::json::exception &e) {
    throw FormatError("checkpoint config echo is not JSON: " + std::string(e.what()));
  }
  echo.erase("derived");
  System sys(ModelConfigFromJson(echo), 0);
  Restore(ckpt, sys.params());
  return sys;
}

}  // namespace adlmvdr
