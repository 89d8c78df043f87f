#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dacapo/config.hpp"
#include "dacapo/scheduler.hpp"

namespace dacapo::io {

// Phase log: kind,start_s,end_s,cycles,acc,drift
void write_phases_csv(std::ostream& os, const sched::Trace& tr);
std::vector<sched::PhaseReport> read_phases_csv(std::istream& is);

// Window log: index,start_s,end_s,frames,dropped,correct,accuracy
void write_windows_csv(std::ostream& os, const sched::Trace& tr);
std::vector<sched::WindowStat> read_windows_csv(std::istream& is);

// Full trace as JSON: config echo, partition, phases, drift events, windows
// and the summary block.
std::string trace_json(const cfg::RunConfig& rc, const sched::Trace& tr);

struct RunSummary {
  uint64_t seed = 0;
  std::string policy;
  double mean_windowed_accuracy = 0;
  uint64_t frames_total = 0;
  uint64_t frames_dropped = 0;
  double drop_rate = 0;
  int drift_count = 0;
  double mean_recovery_s = 0;  // NaN-free: 0 when the scenario has no drift
};

RunSummary summarize(uint64_t seed, const std::string& policy, const sched::Trace& tr,
                     const std::vector<double>& drift_truth);

// seed,policy,mean_windowed_accuracy,frames_total,frames_dropped,drop_rate,
// drift_count,mean_recovery_s
void write_aggregate_csv(std::ostream& os, const std::vector<RunSummary>& rows);
std::vector<RunSummary> read_aggregate_csv(std::istream& is);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace dacapo::io
