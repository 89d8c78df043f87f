#pragma once

#include <string>
#include <vector>

#include "dacapo/perf.hpp"
#include "dacapo/scheduler.hpp"
#include "dacapo/stream.hpp"

namespace dacapo::cfg {

enum class Policy { Spatiotemporal, SpatialOnly, FixedWindow };

const char* policy_name(Policy p);
Policy parse_policy(const std::string& s);  // throws ConfigError

// Everything one run needs, mirroring the sections of the config file.
struct RunConfig {
  // [run]
  Policy policy = Policy::Spatiotemporal;
  uint64_t seed = 1;
  int sweep_seeds = 1;
  std::string out_dir = "runs/latest";
  double duration_s = 1200.0;
  double spatial_window_s = 60.0;
  double fixed_window_s = 180.0;
  double metric_window_s = 15.0;

  // [scheduler]
  sched::Config sched;

  // [student] / [teacher]
  perf::ModelSpec student{"student", {{16, 32}, {32, 8}}};
  perf::ModelSpec teacher{"teacher", {{16, 64}, {64, 8}}};
  int student_pretrain_steps = 400;
  int teacher_pretrain_steps = 1600;

  // [pretrain]
  float pretrain_lr = 0.05f;
  int pretrain_batch = 32;
  int pretrain_samples_per_segment = 160;

  // [scenario] (+ repeated [segment] when preset = custom)
  std::string scenario_preset = "s3";
  std::vector<stream::Segment> custom_segments;

  bool custom_scenario() const { return scenario_preset == "custom"; }
  stream::Scenario scenario() const;
  double run_duration() const;
  sched::PretrainParams pretrain_params() const;
  void validate() const;
};

RunConfig default_config();

// Strict INI-ish parser: '#'/';' comments, [section] headers, key = value.
// Unknown sections or keys are ConfigErrors; malformed syntax is a
// ParseError.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);

// Canonical text form; parse_config_text(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& c);

}  // namespace dacapo::cfg
