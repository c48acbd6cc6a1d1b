// train/trainer.cc

#include "adlmvdr/train/trainer.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "adlmvdr/base/error.h"
#include "adlmvdr/metrics/metrics.h"
#include "adlmvdr/simulate/synth.h"

namespace adlmvdr {

using nlohmann::json;
using namespace nn;

Adam::Adam(ParamStore &store, const OptimConfig &config) : store_(store), config_(config) {
  for (const auto &[_, t] : store_.entries()) {
    m_.emplace_back(t.size(), 0.0);
    v_.emplace_back(t.size(), 0.0);
  }
}

void Adam::Step() {
  auto &entries = store_.entries();
  if (entries.size() != m_.size()) throw Error("Adam: parameter set changed after construction");
  double sq = 0.0;
  for (const auto &[name, t] : entries) {
    if (!t.has_grad()) continue;
    Tensor p = t;
    for (double g : p.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + name);
      sq += g * g;
    }
  }
  last_norm_ = std::sqrt(sq);
  const double clip = config_.grad_clip > 0.0 && last_norm_ > config_.grad_clip
                          ? config_.grad_clip / last_norm_
                          : 1.0;
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (size_t k = 0; k < entries.size(); ++k) {
    Tensor p = entries[k].second;
    if (!p.has_grad()) continue;
    const auto &g = p.grad();
    auto &w = p.mutable_value();
    auto &m = m_[k], &v = v_[k];
    for (size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] * clip;
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gi * gi;
      w[i] -= config_.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
    }
  }
}

double MeanSiSnr(const System &system, const std::vector<Utterance> &set) {
  if (set.empty()) throw ConfigError("cannot score an empty set");
  double sum = 0.0;
  for (const auto &u : set) sum += SiSnr(system.Enhance(u.mixture, u.doa), u.reference);
  return sum / static_cast<double>(set.size());
}

namespace {

json CounterJson(const StabilityCounters &c) {
  const GraphReport &g = c.graph;
  return {{"cov_floored_bins", g.cov_floored_bins},
          {"loading_floor_hits", g.loading_floor_hits},
          {"cholesky_fallbacks", g.cholesky_fallbacks},
          {"eig_retries", g.eig_retries},
          {"small_eigengaps", g.small_eigengaps},
          {"floored_denominators", g.floored_denominators},
          {"nan_losses", c.nan_losses},
          {"nan_gradients", c.nan_gradients},
          {"forward_errors", c.forward_errors},
          {"skipped_silent", c.skipped_silent}};
}

bool Silent(const std::vector<double> &x) {
  if (x.empty()) return true;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  return std::all_of(x.begin(), x.end(), [&](double v) { return v - mean == 0.0; });
}

}  // namespace

TrainSummary Train(const TrainConfig &config, const std::vector<Utterance> &train,
                   const std::vector<Utterance> &valid, const TrainOptions &options,
                   std::optional<System> *result) {
  if (train.empty()) throw ConfigError("training set is empty");
  System sys(config.model, config.seed);
  Adam adam(sys.params(), config.optim);
  std::mt19937_64 rng(MixSeed(config.seed, 0x7a11));
  const size_t chunk =
      static_cast<size_t>(std::lround(config.chunk_seconds * static_cast<double>(kSampleRate)));
  const auto &val_set = valid.empty() ? train : valid;

  std::ofstream log;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    log.open(options.out_dir / "train_log.jsonl", std::ios::trunc);
    if (!log) throw Error("cannot write " + (options.out_dir / "train_log.jsonl").string());
  }
  auto emit = [&](const json &j) {
    if (log) log << j.dump() << '\n' << std::flush;
  };
  auto say = [&](const std::string &s) {
    if (!options.quiet) fmt::print(stderr, "{}\n", s);
  };

  TrainSummary sum;
  StabilityCounters &ctr = sum.counters;
  if (options.score_train_set) sum.initial_train_si_snr = MeanSiSnr(sys, train);
  emit({{"event", "start"},
        {"variant", VariantName(config.model.variant)},
        {"parameters", sys.params().NumScalars()},
        {"train_scenes", train.size()},
        {"valid_scenes", val_set.size()},
        {"config", TrainConfigToJson(config)}});

  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  size_t consecutive_nan = 0;
  bool done = false;
  for (size_t epoch = 1; epoch <= config.epochs && !done; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    size_t epoch_batches = 0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      if (config.max_steps && sum.steps >= config.max_steps) {
        done = true;
        break;
      }
      const size_t stop = std::min(order.size(), start + config.batch_size);
      sys.params().ZeroGrad();
      double loss_sum = 0.0;
      size_t used = 0;
      for (size_t k = start; k < stop; ++k) {
        const Utterance &u = train[order[k]];
        const size_t total = u.mixture.NumSamples();
        size_t offset = 0, len = 0;
        if (chunk > 0 && total > chunk) {
          offset = std::uniform_int_distribution<size_t>(0, total - chunk)(rng);
          len = chunk;
        }
        const Example ex = MakeExample(u, config.model, offset, len);
        if (Silent(ex.reference)) {
          ++ctr.skipped_silent;
          say(fmt::format("warning: silent reference chunk in {}, skipped", u.id));
          continue;
        }
        Tensor loss;
        try {
          System::Output out = sys.Forward(ex);
          ctr.graph += out.report;
          loss = SiSnrLoss(out.wave, ex.reference);
        } catch (const NumericError &e) {
          ++ctr.forward_errors;
          emit({{"event", "forward_error"}, {"scene", u.id}, {"message", e.what()}});
          continue;
        } catch (const ConvergenceError &e) {
          ++ctr.forward_errors;
          emit({{"event", "forward_error"}, {"scene", u.id}, {"message", e.what()}});
          continue;
        }
        if (!std::isfinite(loss.item())) {
          ++ctr.nan_losses;
          emit({{"event", "nan_loss"}, {"scene", u.id}, {"step", sum.steps + 1}});
          if (++consecutive_nan >= 3)
            throw NumericError(fmt::format("training aborted: {} consecutive non-finite losses",
                                           consecutive_nan));
          continue;
        }
        consecutive_nan = 0;
        Scale(loss, 1.0 / static_cast<double>(stop - start)).Backward();
        loss_sum += loss.item();
        ++used;
      }
      if (used == 0) continue;
      try {
        adam.Step();
      } catch (const NumericError &e) {
        ++ctr.nan_gradients;
        emit({{"event", "nan_gradient"}, {"step", sum.steps + 1}, {"message", e.what()}});
        say(fmt::format("epoch {} aborted: {}", epoch, e.what()));
        break;
      }
      ++sum.steps;
      const double loss = loss_sum / static_cast<double>(used);
      sum.step_losses.push_back(loss);
      epoch_loss += loss;
      ++epoch_batches;
      emit({{"event", "step"},
            {"step", sum.steps},
            {"epoch", epoch},
            {"loss", loss},
            {"grad_norm", adam.last_grad_norm()},
            {"counters", CounterJson(ctr)}});
      if (sum.steps % 10 == 0) say(fmt::format("step {} loss {:.3f}", sum.steps, loss));
    }
    sum.epochs = epoch;
    const bool last = done || epoch == config.epochs ||
                      (config.max_steps && sum.steps >= config.max_steps);
    if (epoch % config.valid_every == 0 || last) {
      const double val = MeanSiSnr(sys, val_set);
      const bool best = val > sum.best_valid_si_snr;
      if (best) {
        sum.best_valid_si_snr = val;
        sum.best_epoch = epoch;
        if (!options.out_dir.empty()) SaveCheckpoint(options.out_dir / "best.ckpt", sys.ToCheckpoint());
      }
      emit({{"event", "epoch"},
            {"epoch", epoch},
            {"steps", sum.steps},
            {"train_loss", epoch_batches ? epoch_loss / static_cast<double>(epoch_batches) : 0.0},
            {"valid_si_snr", val},
            {"best", best},
            {"counters", CounterJson(ctr)}});
      say(fmt::format("epoch {} valid Si-SNR {:.2f} dB{}", epoch, val, best ? " (best)" : ""));
    }
    if (config.max_steps && sum.steps >= config.max_steps) done = true;
  }
  if (!options.out_dir.empty()) SaveCheckpoint(options.out_dir / "last.ckpt", sys.ToCheckpoint());
  if (options.score_train_set) sum.final_train_si_snr = MeanSiSnr(sys, train);
  emit({{"event", "end"},
        {"steps", sum.steps},
        {"best_valid_si_snr", sum.best_valid_si_snr},
        {"best_epoch", sum.best_epoch},
        {"counters", CounterJson(ctr)}});
  if (result) result->emplace(std::move(sys));
  return sum;
}

}  // namespace adlmvdr
