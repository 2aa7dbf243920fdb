#pragma once

// Aggregation of per-instance scores into the report tables: per-setting
// averages, relative deltas against the standard baseline, run-consistency
// statistics, persona frequencies and early-termination counts. Aggregation
// is single-threaded over inputs in stable order so emitted artifacts are
// byte-reproducible.

#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spp/core.hpp"
#include "spp/text.hpp"

namespace spp {

struct AggregateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rounds to one decimal, half away from zero, with decimal semantics: a
// value that is exactly x.x5 in decimal arithmetic rounds up in magnitude
// even when its binary representation falls a hair below the midpoint.
// Reports round percentages with this; raw values stay full precision.
inline double round1(double x) {
  double nudged = std::abs(x) * 10.0 + 0.5 + 1e-9;
  double r = std::floor(nudged) / 10.0;
  return x < 0 ? -r : r;
}

struct SettingPair {
  ScoreReport with_system;
  ScoreReport without_system;
};

struct Aggregate {
  double average = 0.0;
  double max = 0.0;
};

// Mean and max of the two per-setting means. Both reports must have scored
// instances; aggregating an empty report is an error, not a zero.
inline Aggregate average_over_settings(const SettingPair& pair) {
  if (pair.with_system.n_scored <= 0 || pair.without_system.n_scored <= 0)
    throw AggregateError("average_over_settings: empty score report");
  Aggregate a;
  a.average = (pair.with_system.mean + pair.without_system.mean) / 2.0;
  a.max = std::max(pair.with_system.mean, pair.without_system.mean);
  return a;
}

// Relative gain/loss against the standard baseline, in percent:
// (method - standard) / standard * 100.
inline double relative_delta(double method_mean, double standard_mean) {
  if (!(standard_mean > 0.0))
    throw AggregateError("relative_delta: baseline mean must be positive");
  return (method_mean - standard_mean) / standard_mean * 100.0;
}

struct ConsistencyStats {
  double mean = 0.0;
  double sample_std = 0.0;  // n-1 denominator
};

inline ConsistencyStats consistency_stats(std::span<const double> run_means) {
  if (run_means.size() < 2)
    throw AggregateError("consistency_stats: need at least two runs");
  ConsistencyStats out;
  double sum = 0.0;
  for (double v : run_means) sum += v;
  out.mean = sum / static_cast<double>(run_means.size());
  double ss = 0.0;
  for (double v : run_means) ss += (v - out.mean) * (v - out.mean);
  out.sample_std = std::sqrt(ss / static_cast<double>(run_means.size() - 1));
  return out;
}

struct PersonaFrequency {
  std::map<std::string, int> counts;  // normalized persona -> transcripts
  int total_transcripts = 0;
};

// Counts, per persona, the number of transcripts in which it appears.
// Names are normalized (trimmed, case-folded, "(you)" stripped) and each
// transcript contributes each distinct persona at most once.
inline PersonaFrequency persona_frequencies(
    const std::vector<ParsedTranscript>& transcripts) {
  PersonaFrequency out;
  out.total_transcripts = static_cast<int>(transcripts.size());
  for (const auto& t : transcripts) {
    std::vector<std::string> seen;
    for (const auto& p : t.participants) {
      std::string norm = text::normalize_persona(p);
      if (norm.empty()) continue;
      if (std::find(seen.begin(), seen.end(), norm) != seen.end()) continue;
      seen.push_back(norm);
      ++out.counts[norm];
    }
  }
  return out;
}

struct EarlyTerminationRow {
  std::string task;
  SystemSetting setting = SystemSetting::WithSystemMessage;
  int terminated = 0;
  int total = 0;
};

// One outcome-group observation for early-termination accounting: whether
// any role-turn transcript of the instance stopped before a final answer.
struct EarlyTerminationObservation {
  std::string task;
  SystemSetting setting = SystemSetting::WithSystemMessage;
  bool early_terminated = false;
};

// Counts early-terminated outcomes grouped by (task, system setting) — the
// report's table axes. Rows are ordered by first appearance of the group.
inline std::vector<EarlyTerminationRow> early_termination_stats(
    const std::vector<EarlyTerminationObservation>& observations) {
  std::vector<EarlyTerminationRow> rows;
  auto find_row = [&](const std::string& task,
                      SystemSetting setting) -> EarlyTerminationRow& {
    for (auto& r : rows)
      if (r.task == task && r.setting == setting) return r;
    rows.push_back({task, setting, 0, 0});
    return rows.back();
  };
  for (const auto& o : observations) {
    auto& row = find_row(o.task, o.setting);
    ++row.total;
    if (o.early_terminated) ++row.terminated;
  }
  return rows;
}

}  // namespace spp
