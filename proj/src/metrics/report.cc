// adlmvdr/metrics/report.cc

#include "adlmvdr/metrics/report.h"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "adlmvdr/base/error.h"
#include "adlmvdr/metrics/metrics.h"
#include "adlmvdr/signal/wav.h"
#include "adlmvdr/simulate/dataset.h"
#include "json.hpp"

namespace adlmvdr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char *const kAngleBins[] = {"0-15", "15-45", "45-90", "90-180"};

GroupStats Mean(const std::string &name, const std::vector<const UtteranceScore *> &rows) {
  GroupStats g;
  g.name = name;
  g.count = rows.size();
  if (rows.empty()) return g;
  for (const auto *r : rows) {
    g.si_snr += r->si_snr;
    g.sdr_proj += r->sdr_proj;
    g.snr += r->snr;
    g.mixture_si_snr += r->mixture_si_snr;
  }
  const double n = static_cast<double>(rows.size());
  g.si_snr /= n;
  g.sdr_proj /= n;
  g.snr /= n;
  g.mixture_si_snr /= n;
  g.si_snr_improvement = g.si_snr - g.mixture_si_snr;
  return g;
}

json GroupJson(const GroupStats &g) {
  return {{"name", g.name},
          {"count", g.count},
          {"si_snr", g.si_snr},
          {"sdr_proj", g.sdr_proj},
          {"snr", g.snr},
          {"mixture_si_snr", g.mixture_si_snr},
          {"si_snr_improvement", g.si_snr_improvement},
          {"pesq", nullptr},
          {"wer", nullptr}};
}

}  // namespace

void Aggregate(EvalReport &report) {
  std::vector<const UtteranceScore *> all;
  std::map<std::string, std::vector<const UtteranceScore *>> angle;
  std::map<size_t, std::vector<const UtteranceScore *>> speakers;
  for (const auto &u : report.utterances) {
    all.push_back(&u);
    angle[u.angle_bin].push_back(&u);
    speakers[u.num_speakers].push_back(&u);
  }
  report.overall = Mean("all", all);
  report.by_angle.clear();
  for (const char *bin : kAngleBins)
    if (angle.count(bin)) report.by_angle.push_back(Mean(bin, angle[bin]));
  for (const auto &[label, rows] : angle)
    if (std::find(std::begin(kAngleBins), std::end(kAngleBins), label) == std::end(kAngleBins))
      report.by_angle.push_back(Mean(label, rows));
  report.by_speakers.clear();
  for (const auto &[n, rows] : speakers)
    report.by_speakers.push_back(Mean(std::to_string(n) + "spk", rows));
}

EvalReport EvaluateSet(const fs::path &manifest, const fs::path &enhanced_dir,
                       size_t filter_len) {
  const std::vector<ManifestEntry> entries = ReadManifest(manifest);
  const fs::path root = manifest.parent_path();
  EvalReport report;
  for (const auto &e : entries) {
    const fs::path est_path = enhanced_dir / (e.id + ".wav");
    MultiWave est;
    try {
      if (!fs::exists(est_path)) throw Error("missing");
      est = ReadWav(est_path.string());
    } catch (const Error &) {
      report.skipped.push_back(e.id);
      continue;
    }
    const MultiWave ref = ReadWav((root / e.reference).string());
    const MultiWave mix = ReadWav((root / e.mixture).string());
    const std::vector<double> &r = ref.channels[0];
    std::vector<double> x = est.channels[0];
    if (x.size() != r.size()) {
      // Enhanced output may differ from the reference by up to a hop.
      if (x.size() + 512 < r.size() || r.size() + 512 < x.size())
        throw ShapeError("eval: " + e.id + " length " + std::to_string(x.size()) +
                         " differs from reference " + std::to_string(r.size()));
      x.resize(r.size(), 0.0);
    }
    UtteranceScore s;
    s.id = e.id;
    s.angle_bin = e.angle_bin;
    s.num_speakers = e.num_speakers;
    s.si_snr = SiSnr(x, r);
    s.sdr_proj = SdrProj(x, r, filter_len);
    s.snr = Snr(x, r);
    s.mixture_si_snr = SiSnr(mix.channels[0], r);
    report.utterances.push_back(s);
  }
  Aggregate(report);
  return report;
}

std::string ReportToJson(const EvalReport &report) {
  json j;
  j["version"] = kEvalReportVersion;
  j["system"] = report.system;
  j["sdr_kind"] = "projection";
  j["overall"] = GroupJson(report.overall);
  j["by_angle"] = json::array();
  for (const auto &g : report.by_angle) j["by_angle"].push_back(GroupJson(g));
  j["by_speakers"] = json::array();
  for (const auto &g : report.by_speakers) j["by_speakers"].push_back(GroupJson(g));
  j["skipped"] = report.skipped;
  j["utterances"] = json::array();
  for (const auto &u : report.utterances)
    j["utterances"].push_back({{"id", u.id},
                               {"angle_bin", u.angle_bin},
                               {"num_speakers", u.num_speakers},
                               {"si_snr", u.si_snr},
                               {"sdr_proj", u.sdr_proj},
                               {"snr", u.snr},
                               {"mixture_si_snr", u.mixture_si_snr},
                               {"pesq", nullptr},
                               {"wer", nullptr}});
  return j.dump(2);
}

std::string FormatTable(const EvalReport &report) {
  std::vector<const GroupStats *> cols;
  for (const auto &g : report.by_angle) cols.push_back(&g);
  for (const auto &g : report.by_speakers) cols.push_back(&g);

  std::string out = "Si-SNR (dB) by condition; SDR is projection SDR; PESQ and WER not computed\n";
  out += fmt::format("{:<24}", "System");
  for (const auto *g : cols) out += fmt::format(" {:>8}", g->name);
  out += fmt::format(" {:>8} {:>10} {:>6} {:>6}\n", "Si-SNR", "SDR(proj)", "PESQ", "WER");
  auto row = [&](const std::string &name, bool mixture) {
    std::string line = fmt::format("{:<24}", name.substr(0, 24));
    for (const auto *g : cols)
      line += fmt::format(" {:>8.2f}", mixture ? g->mixture_si_snr : g->si_snr);
    const auto &o = report.overall;
    line += fmt::format(" {:>8.2f}", mixture ? o.mixture_si_snr : o.si_snr);
    line += mixture ? fmt::format(" {:>10}", "-") : fmt::format(" {:>10.2f}", o.sdr_proj);
    line += fmt::format(" {:>6} {:>6}\n", "n/a", "n/a");
    return line;
  };
  out += row("Noisy mixture", true);
  out += row(report.system, false);
  out += fmt::format("utterances: {}  skipped: {}  Si-SNR improvement: {:.2f} dB\n",
                     report.overall.count, report.skipped.size(),
                     report.overall.si_snr_improvement);
  return out;
}

}  // namespace adlmvdr
