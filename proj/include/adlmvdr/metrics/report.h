// adlmvdr/metrics/report.h
//
// Scores a directory of enhanced WAVs against a dataset manifest and
// aggregates by angle bin and speaker count.

#ifndef ADLMVDR_METRICS_REPORT_H_
#define ADLMVDR_METRICS_REPORT_H_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace adlmvdr {

inline constexpr int kEvalReportVersion = 1;

struct UtteranceScore {
  std::string id;
  std::string angle_bin;
  size_t num_speakers = 1;
  double si_snr = 0.0;          // enhanced vs reference channel
  double sdr_proj = 0.0;
  double snr = 0.0;
  double mixture_si_snr = 0.0;  // reference-channel mixture vs reference
};

struct GroupStats {
  std::string name;
  size_t count = 0;
  double si_snr = 0.0;
  double sdr_proj = 0.0;
  double snr = 0.0;
  double mixture_si_snr = 0.0;
  double si_snr_improvement = 0.0;
};

struct EvalReport {
  std::string system = "enhanced";
  std::vector<UtteranceScore> utterances;
  std::vector<std::string> skipped;  // ids whose enhanced file was missing or unreadable
  GroupStats overall;
  std::vector<GroupStats> by_angle;     // canonical bin order, present bins only
  std::vector<GroupStats> by_speakers;  // "1spk", "2spk", ...
};

// Fills overall and group means from report.utterances.
void Aggregate(EvalReport &report);

// Scores <enhanced_dir>/<id>.wav for every manifest row; channel 0 of the
// reference and mixture files is the scoring reference.
EvalReport EvaluateSet(const std::filesystem::path &manifest,
                       const std::filesystem::path &enhanced_dir,
                       size_t filter_len = 512);

std::string ReportToJson(const EvalReport &report);
// Aligned text table, one row for the mixture and one for the system.
std::string FormatTable(const EvalReport &report);

}  // namespace adlmvdr

#endif  // ADLMVDR_METRICS_REPORT_H_
