#include "dacapo/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace dacapo::cfg {

const char* policy_name(Policy p) {
  switch (p) {
    case Policy::Spatiotemporal: return "spatiotemporal";
    case Policy::SpatialOnly: return "spatial";
    case Policy::FixedWindow: return "fixed-window";
  }
  return "?";
}

Policy parse_policy(const std::string& s) {
  if (s == "spatiotemporal" || s == "st") return Policy::Spatiotemporal;
  if (s == "spatial" || s == "spatial-only") return Policy::SpatialOnly;
  if (s == "fixed-window" || s == "fixed") return Policy::FixedWindow;
  throw ConfigError("unknown policy '" + s + "' (spatiotemporal/spatial/fixed-window)");
}

stream::Scenario RunConfig::scenario() const {
  if (custom_scenario()) {
    stream::Scenario sc;
    sc.name = "custom";
    sc.segments = custom_segments;
    return stream::normalize_scenario(std::move(sc));
  }
  return stream::make_preset(scenario_preset, duration_s);
}

double RunConfig::run_duration() const {
  if (!custom_scenario()) return duration_s;
  double t = 0;
  for (const auto& s : custom_segments) t += s.duration_s;
  return t;
}

sched::PretrainParams RunConfig::pretrain_params() const {
  sched::PretrainParams pp;
  pp.student_spec = student;
  pp.teacher_spec = teacher;
  pp.student_steps = student_pretrain_steps;
  pp.teacher_steps = teacher_pretrain_steps;
  pp.lr = pretrain_lr;
  pp.batch = pretrain_batch;
  pp.samples_per_segment = pretrain_samples_per_segment;
  return pp;
}

void RunConfig::validate() const {
  if (!(duration_s > 0)) throw ConfigError("duration_s must be positive");
  if (!(spatial_window_s > 0) || !(fixed_window_s > 0) || !(metric_window_s > 0)) {
    throw ConfigError("window lengths must be positive");
  }
  if (sweep_seeds < 1) throw ConfigError("sweep_seeds must be >= 1");
  if (out_dir.empty()) throw ConfigError("out dir must not be empty");
  sched.validate();
  student.validate();
  teacher.validate();
  if (student_pretrain_steps < 0 || teacher_pretrain_steps < 0) {
    throw ConfigError("pretrain steps must be >= 0");
  }
  if (!(pretrain_lr > 0)) throw ConfigError("pretrain lr must be positive");
  if (pretrain_batch < 1) throw ConfigError("pretrain batch must be >= 1");
  if (pretrain_samples_per_segment < 1) throw ConfigError("samples_per_segment must be >= 1");
  if (custom_scenario()) {
    if (custom_segments.empty()) throw ConfigError("preset = custom needs [segment] sections");
  } else {
    if (!stream::is_preset_name(scenario_preset)) {
      throw ConfigError("unknown scenario preset '" + scenario_preset + "'");
    }
    if (!custom_segments.empty()) {
      throw ConfigError("[segment] sections require preset = custom");
    }
  }
  scenario();  // segment-level checks
}

RunConfig default_config() { return RunConfig{}; }

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& v, int line) {
  throw ConfigError("bad value '" + v + "' for " + key + " (line " + std::to_string(line) + ")");
}

double to_double(const std::string& key, const std::string& v, int line) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) bad_value(key, v, line);
    return d;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(key, v, line);
  }
}

int64_t to_i64(const std::string& key, const std::string& v, int line) {
  try {
    size_t pos = 0;
    int64_t d = std::stoll(v, &pos);
    if (pos != v.size()) bad_value(key, v, line);
    return d;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(key, v, line);
  }
}

uint64_t to_u64(const std::string& key, const std::string& v, int line) {
  try {
    size_t pos = 0;
    uint64_t d = std::stoull(v, &pos);
    if (pos != v.size() || (!v.empty() && v[0] == '-')) bad_value(key, v, line);
    return d;
  } catch (const ConfigError&) {
    throw;
  } catch (...) {
    bad_value(key, v, line);
  }
}

int to_int(const std::string& key, const std::string& v, int line) {
  int64_t d = to_i64(key, v, line);
  if (d < INT32_MIN || d > INT32_MAX) bad_value(key, v, line);
  return static_cast<int>(d);
}

std::vector<double> to_doubles(const std::string& key, const std::string& v, int line) {
  std::istringstream is(v);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) out.push_back(to_double(key, tok, line));
  return out;
}

std::vector<perf::LayerDims> to_layers(const std::string& key, const std::string& v, int line) {
  std::istringstream is(v);
  std::vector<int> dims;
  std::string tok;
  while (is >> tok) dims.push_back(to_int(key, tok, line));
  if (dims.size() < 2) bad_value(key, v, line);
  std::vector<perf::LayerDims> out;
  for (size_t i = 0; i + 1 < dims.size(); ++i) out.push_back({dims[i], dims[i + 1]});
  return out;
}

std::string fmt_double(double d) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), d);
  return std::string(buf, res.ptr);
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig c = default_config();
  std::istringstream is(text);
  std::string raw, section;
  int line = 0;
  bool in_segment = false;
  while (std::getline(is, raw)) {
    ++line;
    std::string s = raw;
    size_t hash = s.find_first_of("#;");
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ParseError("unterminated section header (line " +
                                            std::to_string(line) + ")");
      section = trim(s.substr(1, s.size() - 2));
      in_segment = section == "segment";
      if (in_segment) {
        stream::Segment seg;
        seg.priors = stream::uniform_priors();
        c.custom_segments.push_back(seg);
      }
      continue;
    }
    size_t eq = s.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected key = value (line " + std::to_string(line) + ")");
    }
    std::string key = trim(s.substr(0, eq));
    std::string val = trim(s.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key (line " + std::to_string(line) + ")");

    auto unknown = [&]() -> void {
      throw ConfigError("unknown key '" + key + "' in [" + section + "] (line " +
                        std::to_string(line) + ")");
    };

    if (section == "run") {
      if (key == "policy") c.policy = parse_policy(val);
      else if (key == "seed") c.seed = to_u64(key, val, line);
      else if (key == "sweep_seeds") c.sweep_seeds = to_int(key, val, line);
      else if (key == "out") c.out_dir = val;
      else if (key == "duration_s") c.duration_s = to_double(key, val, line);
      else if (key == "spatial_window_s") c.spatial_window_s = to_double(key, val, line);
      else if (key == "fixed_window_s") c.fixed_window_s = to_double(key, val, line);
      else if (key == "metric_window_s") c.metric_window_s = to_double(key, val, line);
      else unknown();
    } else if (section == "scheduler") {
      if (key == "n_t") c.sched.n_t = to_int(key, val, line);
      else if (key == "n_v") c.sched.n_v = to_int(key, val, line);
      else if (key == "n_l") c.sched.n_l = to_int(key, val, line);
      else if (key == "n_ldd") c.sched.n_ldd = to_int(key, val, line);
      else if (key == "v_thr") c.sched.v_thr = to_double(key, val, line);
      else if (key == "buffer_capacity") c.sched.buffer_capacity = to_int(key, val, line);
      else if (key == "epochs") c.sched.epochs = to_int(key, val, line);
      else if (key == "train_batch") c.sched.train_batch = to_int(key, val, line);
      else if (key == "label_batch") c.sched.label_batch = to_int(key, val, line);
      else if (key == "lr") c.sched.lr = static_cast<float>(to_double(key, val, line));
      else if (key == "clock_hz") c.sched.clock_hz = to_u64(key, val, line);
      else if (key == "fps") c.sched.fps = to_int(key, val, line);
      else if (key == "infer_precision") c.sched.infer_precision = mx::parse_precision(val);
      else if (key == "retrain_precision") c.sched.retrain_precision = mx::parse_precision(val);
      else unknown();
    } else if (section == "student") {
      if (key == "layers") c.student.layers = to_layers(key, val, line);
      else if (key == "pretrain_steps") c.student_pretrain_steps = to_int(key, val, line);
      else unknown();
    } else if (section == "teacher") {
      if (key == "layers") c.teacher.layers = to_layers(key, val, line);
      else if (key == "pretrain_steps") c.teacher_pretrain_steps = to_int(key, val, line);
      else unknown();
    } else if (section == "pretrain") {
      if (key == "lr") c.pretrain_lr = static_cast<float>(to_double(key, val, line));
      else if (key == "batch") c.pretrain_batch = to_int(key, val, line);
      else if (key == "samples_per_segment")
        c.pretrain_samples_per_segment = to_int(key, val, line);
      else unknown();
    } else if (section == "scenario") {
      if (key == "preset") c.scenario_preset = val;
      else unknown();
    } else if (section == "segment") {
      if (c.custom_segments.empty()) {
        throw ParseError("segment key outside [segment] (line " + std::to_string(line) + ")");
      }
      stream::Segment& seg = c.custom_segments.back();
      if (key == "duration_s") seg.duration_s = to_double(key, val, line);
      else if (key == "priors") {
        auto p = to_doubles(key, val, line);
        if (p.size() != kClassCount) {
          throw ConfigError("priors must list " + std::to_string(kClassCount) +
                            " weights (line " + std::to_string(line) + ")");
        }
        for (int i = 0; i < kClassCount; ++i) seg.priors[i] = p[i];
      } else if (key == "covariate_offset")
        seg.shift.mean_offset = static_cast<float>(to_double(key, val, line));
      else if (key == "covariate_scale")
        seg.shift.scale = static_cast<float>(to_double(key, val, line));
      else if (key == "concept_seed") seg.concept_seed = to_u64(key, val, line);
      else unknown();
    } else {
      throw ConfigError("unknown section [" + section + "] (line " + std::to_string(line) + ")");
    }
  }
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open config " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream o;
  o << "[run]\n";
  o << "policy = " << policy_name(c.policy) << "\n";
  o << "seed = " << c.seed << "\n";
  o << "sweep_seeds = " << c.sweep_seeds << "\n";
  o << "out = " << c.out_dir << "\n";
  o << "duration_s = " << fmt_double(c.duration_s) << "\n";
  o << "spatial_window_s = " << fmt_double(c.spatial_window_s) << "\n";
  o << "fixed_window_s = " << fmt_double(c.fixed_window_s) << "\n";
  o << "metric_window_s = " << fmt_double(c.metric_window_s) << "\n";
  o << "\n[scheduler]\n";
  o << "n_t = " << c.sched.n_t << "\n";
  o << "n_v = " << c.sched.n_v << "\n";
  o << "n_l = " << c.sched.n_l << "\n";
  o << "n_ldd = " << c.sched.n_ldd << "\n";
  o << "v_thr = " << fmt_double(c.sched.v_thr) << "\n";
  o << "buffer_capacity = " << c.sched.buffer_capacity << "\n";
  o << "epochs = " << c.sched.epochs << "\n";
  o << "train_batch = " << c.sched.train_batch << "\n";
  o << "label_batch = " << c.sched.label_batch << "\n";
  o << "lr = " << fmt_double(c.sched.lr) << "\n";
  o << "clock_hz = " << c.sched.clock_hz << "\n";
  o << "fps = " << c.sched.fps << "\n";
  o << "infer_precision = " << mx::precision_name(c.sched.infer_precision) << "\n";
  o << "retrain_precision = " << mx::precision_name(c.sched.retrain_precision) << "\n";
  auto emit_layers = [&o](const perf::ModelSpec& m) {
    o << "layers =";
    o << " " << m.layers.front().in_features;
    for (const auto& l : m.layers) o << " " << l.out_features;
    o << "\n";
  };
  o << "\n[student]\n";
  emit_layers(c.student);
  o << "pretrain_steps = " << c.student_pretrain_steps << "\n";
  o << "\n[teacher]\n";
  emit_layers(c.teacher);
  o << "pretrain_steps = " << c.teacher_pretrain_steps << "\n";
  o << "\n[pretrain]\n";
  o << "lr = " << fmt_double(c.pretrain_lr) << "\n";
  o << "batch = " << c.pretrain_batch << "\n";
  o << "samples_per_segment = " << c.pretrain_samples_per_segment << "\n";
  o << "\n[scenario]\n";
  o << "preset = " << c.scenario_preset << "\n";
  for (const auto& seg : c.custom_segments) {
    o << "\n[segment]\n";
    o << "duration_s = " << fmt_double(seg.duration_s) << "\n";
    o << "priors =";
    for (double p : seg.priors) o << " " << fmt_double(p);
    o << "\n";
    o << "covariate_offset = " << fmt_double(seg.shift.mean_offset) << "\n";
    o << "covariate_scale = " << fmt_double(seg.shift.scale) << "\n";
    o << "concept_seed = " << seg.concept_seed << "\n";
  }
  return o.str();
}

}  // namespace dacapo::cfg
