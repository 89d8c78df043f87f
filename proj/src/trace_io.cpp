#include "dacapo/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace dacapo::io {

namespace {

// Shortest exact representation; reparsing yields the identical double.
std::string fd(double d) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof(buf), d);
  return std::string(buf, r.ptr);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t c = line.find(',', start);
    if (c == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, c - start));
    start = c + 1;
  }
  return out;
}

double csv_double(const std::string& s) {
  try {
    size_t pos = 0;
    double d = std::stod(s, &pos);
    if (pos != s.size()) throw ParseError("bad number '" + s + "'");
    return d;
  } catch (const ParseError&) {
    throw;
  } catch (...) {
    throw ParseError("bad number '" + s + "'");
  }
}

uint64_t csv_u64(const std::string& s) {
  try {
    size_t pos = 0;
    uint64_t d = std::stoull(s, &pos);
    if (pos != s.size()) throw ParseError("bad integer '" + s + "'");
    return d;
  } catch (const ParseError&) {
    throw;
  } catch (...) {
    throw ParseError("bad integer '" + s + "'");
  }
}

void expect_header(std::istream& is, const std::string& want) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty csv");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != want) throw ParseError("unexpected csv header '" + line + "'");
}

sched::PhaseKind parse_kind(const std::string& s) {
  if (s == "retrain") return sched::PhaseKind::Retrain;
  if (s == "label") return sched::PhaseKind::Label;
  if (s == "validate") return sched::PhaseKind::Validate;
  throw ParseError("unknown phase kind '" + s + "'");
}

constexpr const char* kPhaseHeader = "kind,start_s,end_s,cycles,acc,drift";
constexpr const char* kWindowHeader = "index,start_s,end_s,frames,dropped,correct,accuracy";
constexpr const char* kAggregateHeader =
    "seed,policy,mean_windowed_accuracy,frames_total,frames_dropped,drop_rate,drift_count,"
    "mean_recovery_s";

}  // namespace

void write_phases_csv(std::ostream& os, const sched::Trace& tr) {
  os << kPhaseHeader << "\n";
  for (const auto& p : tr.phases) {
    os << sched::phase_kind_name(p.kind) << ',' << fd(p.start_s) << ',' << fd(p.end_s) << ','
       << p.cycles << ',' << fd(p.acc) << ',' << (p.drift ? 1 : 0) << "\n";
  }
}

std::vector<sched::PhaseReport> read_phases_csv(std::istream& is) {
  expect_header(is, kPhaseHeader);
  std::vector<sched::PhaseReport> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 6) throw ParseError("phase row needs 6 fields");
    sched::PhaseReport p;
    p.kind = parse_kind(f[0]);
    p.start_s = csv_double(f[1]);
    p.end_s = csv_double(f[2]);
    p.cycles = csv_u64(f[3]);
    p.acc = csv_double(f[4]);
    p.drift = csv_u64(f[5]) != 0;
    out.push_back(p);
  }
  return out;
}

void write_windows_csv(std::ostream& os, const sched::Trace& tr) {
  os << kWindowHeader << "\n";
  for (const auto& w : tr.windows) {
    os << w.index << ',' << fd(w.start_s) << ',' << fd(w.end_s) << ',' << w.frames << ','
       << w.dropped << ',' << w.correct << ',' << fd(w.accuracy) << "\n";
  }
}

std::vector<sched::WindowStat> read_windows_csv(std::istream& is) {
  expect_header(is, kWindowHeader);
  std::vector<sched::WindowStat> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 7) throw ParseError("window row needs 7 fields");
    sched::WindowStat w;
    w.index = static_cast<int>(csv_u64(f[0]));
    w.start_s = csv_double(f[1]);
    w.end_s = csv_double(f[2]);
    w.frames = csv_u64(f[3]);
    w.dropped = csv_u64(f[4]);
    w.correct = csv_u64(f[5]);
    w.accuracy = csv_double(f[6]);
    out.push_back(w);
  }
  return out;
}

RunSummary summarize(uint64_t seed, const std::string& policy, const sched::Trace& tr,
                     const std::vector<double>& drift_truth) {
  RunSummary s;
  s.seed = seed;
  s.policy = policy;
  s.mean_windowed_accuracy = tr.mean_windowed_accuracy();
  s.frames_total = tr.frames_total();
  s.frames_dropped = tr.frames_dropped();
  s.drop_rate = s.frames_total == 0
                    ? 0.0
                    : static_cast<double>(s.frames_dropped) / static_cast<double>(s.frames_total);
  s.drift_count = static_cast<int>(tr.drift_events_s.size());
  if (!drift_truth.empty()) {
    auto rec = sched::recovery_times(tr, drift_truth);
    double sum = 0;
    for (double r : rec) sum += r;
    s.mean_recovery_s = sum / static_cast<double>(rec.size());
  }
  return s;
}

void write_aggregate_csv(std::ostream& os, const std::vector<RunSummary>& rows) {
  os << kAggregateHeader << "\n";
  for (const auto& r : rows) {
    os << r.seed << ',' << r.policy << ',' << fd(r.mean_windowed_accuracy) << ','
       << r.frames_total << ',' << r.frames_dropped << ',' << fd(r.drop_rate) << ','
       << r.drift_count << ',' << fd(r.mean_recovery_s) << "\n";
  }
}

std::vector<RunSummary> read_aggregate_csv(std::istream& is) {
  expect_header(is, kAggregateHeader);
  std::vector<RunSummary> out;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 8) throw ParseError("aggregate row needs 8 fields");
    RunSummary r;
    r.seed = csv_u64(f[0]);
    r.policy = f[1];
    r.mean_windowed_accuracy = csv_double(f[2]);
    r.frames_total = csv_u64(f[3]);
    r.frames_dropped = csv_u64(f[4]);
    r.drop_rate = csv_double(f[5]);
    r.drift_count = static_cast<int>(csv_u64(f[6]));
    r.mean_recovery_s = csv_double(f[7]);
    out.push_back(r);
  }
  return out;
}

std::string trace_json(const cfg::RunConfig& rc, const sched::Trace& tr) {
  using nlohmann::json;
  json j;
  j["config"] = {{"policy", cfg::policy_name(rc.policy)},
                 {"seed", rc.seed},
                 {"duration_s", tr.duration_s},
                 {"clock_hz", tr.clock_hz},
                 {"fps", tr.fps},
                 {"metric_window_s", tr.window_s},
                 {"scenario", rc.scenario_preset}};
  j["config_text"] = cfg::serialize_config(rc);
  j["partition"] = {{"top_rows", tr.partition.top_rows},
                    {"bottom_rows", tr.partition.bottom_rows}};
  json phases = json::array();
  for (const auto& p : tr.phases) {
    phases.push_back({{"kind", sched::phase_kind_name(p.kind)},
                      {"start_s", p.start_s},
                      {"end_s", p.end_s},
                      {"cycles", p.cycles},
                      {"acc", p.acc},
                      {"drift", p.drift}});
  }
  j["phases"] = std::move(phases);
  j["drift_events_s"] = tr.drift_events_s;
  json windows = json::array();
  for (const auto& w : tr.windows) {
    windows.push_back({{"index", w.index},
                       {"start_s", w.start_s},
                       {"end_s", w.end_s},
                       {"frames", w.frames},
                       {"dropped", w.dropped},
                       {"correct", w.correct},
                       {"accuracy", w.accuracy}});
  }
  j["windows"] = std::move(windows);
  auto truth = rc.scenario().boundaries();
  RunSummary s = summarize(rc.seed, cfg::policy_name(rc.policy), tr, truth);
  j["summary"] = {{"mean_windowed_accuracy", s.mean_windowed_accuracy},
                  {"frames_total", s.frames_total},
                  {"frames_dropped", s.frames_dropped},
                  {"drop_rate", s.drop_rate},
                  {"drift_count", s.drift_count},
                  {"mean_recovery_s", s.mean_recovery_s}};
  return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path + " for writing");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) throw ParseError("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace dacapo::io
