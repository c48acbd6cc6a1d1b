// train/config.cc

#include "adlmvdr/train/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include "toml.hpp"

#include "adlmvdr/base/error.h"

namespace adlmvdr {

using nlohmann::json;

namespace {

const std::vector<std::pair<Variant, std::string>> kVariantNames = {
    {Variant::kNnCrm, "nn_crm"},           {Variant::kNnCrf, "nn_crf"},
    {Variant::kMvdrCrm, "mvdr_crm"},       {Variant::kMvdrCrf, "mvdr_crf"},
    {Variant::kMultitapMvdr, "multitap_mvdr"}, {Variant::kAdlMvdr, "adl_mvdr"},
};

json TomlToJson(const toml::node &node) {
  if (const auto *t = node.as_table()) {
    json out = json::object();
    for (const auto &[k, v] : *t) out[std::string(k.str())] = TomlToJson(v);
    return out;
  }
  if (const auto *a = node.as_array()) {
    json out = json::array();
    for (const auto &v : *a) out.push_back(TomlToJson(v));
    return out;
  }
  if (auto v = node.value_exact<int64_t>()) return *v;
  if (auto v = node.value_exact<double>()) return *v;
  if (auto v = node.value_exact<bool>()) return *v;
  if (auto v = node.value_exact<std::string>()) return *v;
  throw ConfigError("config: unsupported TOML value (dates and times are not accepted)");
}

bool HasNegativeInteger(const json &v) {
  if (v.is_array()) {
    for (const auto &e : v)
      if (HasNegativeInteger(e)) return true;
    return false;
  }
  return v.is_number_integer() && v.get<int64_t>() < 0;
}

// Reads keys from one table and rejects any it was not asked about.
class Table {
 public:
  Table(const json &tree, const std::string &name) : name_(name) {
    if (!tree.contains(name)) return;
    node_ = &tree.at(name);
    if (!node_->is_object()) throw ConfigError("config: [" + name + "] must be a table");
  }
  ~Table() noexcept(false) {
    if (!node_ || std::uncaught_exceptions()) return;
    for (const auto &[k, _] : node_->items())
      if (!used_.count(k)) throw ConfigError("config: unknown key " + name_ + "." + k);
  }

  template <typename T>
  void Get(const std::string &key, T &out) {
    used_.insert(key);
    if (!node_ || !node_->contains(key)) return;
    const json &v = node_->at(key);
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError("");
        out = v.get<double>();
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
        out = v.get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<int64_t>() < 0))
          throw ConfigError("");
        out = v.get<T>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
        out = v.get<std::string>();
      } else {
        if (HasNegativeInteger(v)) throw ConfigError("");
        out = v.get<T>();
      }
    } catch (const std::exception &) {
      throw ConfigError("config: " + name_ + "." + key + " has the wrong type: " + v.dump());
    }
  }

 private:
  std::string name_;
  const json *node_ = nullptr;
  std::set<std::string> used_;
};

std::string NormName(nn::GruInputNorm n) { return n == nn::GruInputNorm::kTrace ? "trace" : "none"; }

nn::GruInputNorm ParseNorm(const std::string &s) {
  if (s == "trace") return nn::GruInputNorm::kTrace;
  if (s == "none") return nn::GruInputNorm::kNone;
  throw ConfigError("config: grunet.input_norm must be \"trace\" or \"none\", got " + s);
}

}  // namespace

std::string VariantName(Variant v) {
  for (const auto &[k, n] : kVariantNames)
    if (k == v) return n;
  return "?";
}

Variant ParseVariant(const std::string &name) {
  for (const auto &[k, n] : kVariantNames)
    if (n == name) return k;
  throw ConfigError("unknown variant \"" + name +
                    "\" (nn_crm, nn_crf, mvdr_crm, mvdr_crf, multitap_mvdr, adl_mvdr)");
}

bool IsMaskVariant(Variant v) { return v == Variant::kNnCrm || v == Variant::kMvdrCrm; }
bool IsNnVariant(Variant v) { return v == Variant::kNnCrm || v == Variant::kNnCrf; }

void ModelConfig::Finalize() {
  try {
    stft.Validate();
  } catch (const Error &e) {
    throw ConfigError(std::string("config: stft: ") + e.what());
  }
  if (num_mics < 2) throw ConfigError("config: model.num_mics must be at least 2");
  if (!(mic_spacing > 0.0)) throw ConfigError("config: model.mic_spacing must be positive");
  if (features.ref_channel >= num_mics) throw ConfigError("config: features.ref_channel out of range");
  if (!features.use_lps && !features.use_ipd && !features.use_df)
    throw ConfigError("config: at least one feature block must be enabled");
  if (variant == Variant::kMultitapMvdr && taps < 2)
    throw ConfigError("config: multitap_mvdr needs model.taps >= 2");
  if (!(loading_eps > 0.0)) throw ConfigError("config: model.loading_eps must be positive");
  if (IsMaskVariant(variant)) time_half = freq_half = 0;
  estimator.num_bins = NumBins();
  estimator.time_half = time_half;
  estimator.freq_half = freq_half;
  estimator.Validate();
  steering_net.output_dim = nn::SteeringNetOutput(num_mics);
  inverse_net.output_dim = nn::InverseNetOutput(num_mics);
  if (variant == Variant::kAdlMvdr) {
    steering_net.Validate();
    inverse_net.Validate();
  }
}

void TrainConfig::Finalize() {
  model.Finalize();
  if (batch_size == 0) throw ConfigError("config: train.batch_size must be positive");
  if (epochs == 0) throw ConfigError("config: train.epochs must be positive");
  if (valid_every == 0) throw ConfigError("config: train.valid_every must be positive");
  if (chunk_seconds < 0.0) throw ConfigError("config: train.chunk_seconds must be >= 0");
  if (!(optim.lr > 0.0)) throw ConfigError("config: train.lr must be positive");
  if (!(optim.beta1 >= 0.0 && optim.beta1 < 1.0 && optim.beta2 >= 0.0 && optim.beta2 < 1.0))
    throw ConfigError("config: Adam betas must lie in [0, 1)");
  if (optim.grad_clip < 0.0) throw ConfigError("config: train.grad_clip must be >= 0");
  if (precision != "float64")
    throw ConfigError("config: train.precision \"" + precision +
                      "\" is not available; this build trains in float64 only");
}

json LoadConfigTree(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (path.extension() == ".toml") {
    try {
      return TomlToJson(toml::parse(text, path.string()));
    } catch (const toml::parse_error &e) {
      std::ostringstream msg;
      msg << "config: " << path.string() << ":" << e.source().begin.line << ": "
          << e.description();
      throw ConfigError(msg.str());
    }
  }
  try {
    json tree = json::parse(text);
    if (!tree.is_object()) throw ConfigError("config: top level must be an object");
    return tree;
  } catch (const json::parse_error &e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
}

ModelConfig ModelConfigFromJson(const json &tree) {
  ModelConfig c;
  {
    Table t(tree, "model");
    std::string variant = VariantName(c.variant);
    t.Get("variant", variant);
    c.variant = ParseVariant(variant);
    t.Get("num_mics", c.num_mics);
    t.Get("mic_spacing", c.mic_spacing);
    t.Get("time_half", c.time_half);
    t.Get("freq_half", c.freq_half);
    t.Get("taps", c.taps);
    t.Get("loading_eps", c.loading_eps);
    t.Get("per_frame_norm", c.per_frame_norm);
  }
  {
    Table t(tree, "stft");
    t.Get("fft_size", c.stft.fft_size);
    c.stft.frame_len = c.stft.fft_size;
    t.Get("frame_len", c.stft.frame_len);
    t.Get("hop", c.stft.hop);
    t.Get("window", c.stft.window);
  }
  {
    Table t(tree, "features");
    t.Get("ref_channel", c.features.ref_channel);
    t.Get("use_lps", c.features.use_lps);
    t.Get("use_ipd", c.features.use_ipd);
    t.Get("use_df", c.features.use_df);
    std::string enc = c.features.ipd_encoding == IpdEncoding::kAngle ? "angle" : "cos_sin";
    t.Get("ipd_encoding", enc);
    if (enc == "angle") c.features.ipd_encoding = IpdEncoding::kAngle;
    else if (enc == "cos_sin") c.features.ipd_encoding = IpdEncoding::kCosSin;
    else throw ConfigError("config: features.ipd_encoding must be \"angle\" or \"cos_sin\"");
    std::vector<std::vector<size_t>> pairs;
    t.Get("pairs", pairs);
    for (const auto &p : pairs) {
      if (p.size() != 2 || p[0] == p[1] || p[0] >= c.num_mics || p[1] >= c.num_mics)
        throw ConfigError("config: features.pairs entries must be two distinct mic indices");
      c.features.pairs.emplace_back(p[0], p[1]);
    }
  }
  {
    Table t(tree, "estimator");
    t.Get("channels", c.estimator.channels);
    t.Get("kernel", c.estimator.kernel);
    t.Get("dilations", c.estimator.dilations);
    t.Get("repeats", c.estimator.repeats);
    t.Get("mask_bound", c.estimator.mask_bound);
  }
  {
    Table t(tree, "grunet");
    t.Get("steering_hidden", c.steering_net.hidden);
    t.Get("inverse_hidden", c.inverse_net.hidden);
    std::string norm = NormName(c.inverse_net.input_norm);
    t.Get("input_norm", norm);
    c.steering_net.input_norm = c.inverse_net.input_norm = ParseNorm(norm);
    t.Get("identity_init", c.grunet_identity_init);
  }
  c.Finalize();
  return c;
}

json ModelConfigToJson(const ModelConfig &c) {
  json pairs = json::array();
  for (const auto &[a, b] : c.features.pairs) pairs.push_back({a, b});
  json tree;
  tree["model"] = {{"variant", VariantName(c.variant)}, {"num_mics", c.num_mics},
                   {"mic_spacing", c.mic_spacing},      {"time_half", c.time_half},
                   {"freq_half", c.freq_half},          {"taps", c.taps},
                   {"loading_eps", c.loading_eps},      {"per_frame_norm", c.per_frame_norm}};
  tree["stft"] = {{"fft_size", c.stft.fft_size}, {"frame_len", c.stft.frame_len},
                  {"hop", c.stft.hop}, {"window", c.stft.window}};
  tree["features"] = {
      {"ref_channel", c.features.ref_channel}, {"use_lps", c.features.use_lps},
      {"use_ipd", c.features.use_ipd},         {"use_df", c.features.use_df},
      {"ipd_encoding", c.features.ipd_encoding == IpdEncoding::kAngle ? "angle" : "cos_sin"},
      {"pairs", pairs}};
  tree["estimator"] = {{"channels", c.estimator.channels}, {"kernel", c.estimator.kernel},
                       {"dilations", c.estimator.dilations}, {"repeats", c.estimator.repeats},
                       {"mask_bound", c.estimator.mask_bound}};
  tree["grunet"] = {{"steering_hidden", c.steering_net.hidden},
                    {"inverse_hidden", c.inverse_net.hidden},
                    {"input_norm", NormName(c.inverse_net.input_norm)},
                    {"identity_init", c.grunet_identity_init}};
  return tree;
}

TrainConfig TrainConfigFromJson(const json &tree) {
  static const std::set<std::string> kTables = {"model", "stft",  "features", "estimator",
                                                "grunet", "train", "simulate"};
  for (const auto &[k, _] : tree.items())
    if (!kTables.count(k)) throw ConfigError("config: unknown table [" + k + "]");
  TrainConfig c;
  {
    Table t(tree, "train");
    t.Get("epochs", c.epochs);
    t.Get("max_steps", c.max_steps);
    t.Get("batch_size", c.batch_size);
    t.Get("chunk_seconds", c.chunk_seconds);
    t.Get("seed", c.seed);
    t.Get("valid_every", c.valid_every);
    t.Get("precision", c.precision);
    t.Get("lr", c.optim.lr);
    t.Get("beta1", c.optim.beta1);
    t.Get("beta2", c.optim.beta2);
    t.Get("eps", c.optim.eps);
    t.Get("grad_clip", c.optim.grad_clip);
    t.Get("train_manifest", c.train_manifest);
    t.Get("valid_manifest", c.valid_manifest);
  }
  c.model = ModelConfigFromJson(tree);
  c.Finalize();
  return c;
}

json TrainConfigToJson(const TrainConfig &c) {
  json tree = ModelConfigToJson(c.model);
  tree["train"] = {{"epochs", c.epochs},
                   {"max_steps", c.max_steps},
                   {"batch_size", c.batch_size},
                   {"chunk_seconds", c.chunk_seconds},
                   {"seed", c.seed},
                   {"valid_every", c.valid_every},
                   {"precision", c.precision},
                   {"lr", c.optim.lr},
                   {"beta1", c.optim.beta1},
                   {"beta2", c.optim.beta2},
                   {"eps", c.optim.eps},
                   {"grad_clip", c.optim.grad_clip},
                   {"train_manifest", c.train_manifest},
                   {"valid_manifest", c.valid_manifest}};
  return tree;
}

DatasetSpec DatasetSpecFromJson(const json &tree) {
  DatasetSpec s;
  {
    Table t(tree, "simulate");
    t.Get("num_scenes", s.num_scenes);
    t.Get("seed", s.seed);
    t.Get("chunk_seconds", s.chunk_seconds);
    t.Get("num_mics", s.num_mics);
    t.Get("mic_spacing", s.mic_spacing);
    t.Get("speaker_proportions", s.speaker_proportions);
    t.Get("sir_min_db", s.sir_min_db);
    t.Get("sir_max_db", s.sir_max_db);
    t.Get("add_noise", s.add_noise);
    t.Get("snr_min_db", s.snr_min_db);
    t.Get("snr_max_db", s.snr_max_db);
    t.Get("reverb_min_s", s.reverb_min_s);
    t.Get("reverb_max_s", s.reverb_max_s);
    t.Get("doa_span", s.doa_span);
    t.Get("dry_pool", s.dry_pool);
    t.Get("jobs", s.jobs);
  }
  try {
    s.Validate();
  } catch (const ConfigError &) {
    throw;
  } catch (const Error &e) {
    throw ConfigError(std::string("config: simulate: ") + e.what());
  }
  return s;
}

}  // namespace adlmvdr
