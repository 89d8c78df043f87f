#include "dacapo/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace dacapo::sched {

void Config::validate() const {
  if (n_t < 1) throw ConfigError("retrain draw must be >= 1");
  if (n_v != n_t / 3) {
    throw ConfigError("validation draw must be a third of the train draw (got " +
                      std::to_string(n_v) + " for " + std::to_string(n_t) + ")");
  }
  if (n_l < 1) throw ConfigError("routine label budget must be >= 1");
  if (n_ldd != 4 * n_l) {
    throw ConfigError("drift label budget must be four times the routine one (got " +
                      std::to_string(n_ldd) + " for " + std::to_string(n_l) + ")");
  }
  if (!(v_thr < 0)) throw ConfigError("drift threshold must be negative");
  if (buffer_capacity < 1) throw ConfigError("buffer capacity must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (train_batch < 1) throw ConfigError("train batch must be >= 1");
  if (label_batch < 1) throw ConfigError("label batch must be >= 1");
  if (!(lr > 0)) throw ConfigError("learning rate must be positive");
  if (clock_hz < 1) throw ConfigError("clock must be >= 1 Hz");
  if (fps < 1) throw ConfigError("fps must be >= 1");
}

bool detect_drift(double acc_l, double acc_v, double v_thr) {
  return (acc_l - acc_v) < v_thr;
}

const char* phase_kind_name(PhaseKind k) {
  switch (k) {
    case PhaseKind::Retrain: return "retrain";
    case PhaseKind::Label: return "label";
    case PhaseKind::Validate: return "validate";
  }
  return "?";
}

uint64_t Trace::frames_dropped() const {
  uint64_t n = 0;
  for (uint8_t f : frame_flags) n += (f == kFrameDropped);
  return n;
}

uint64_t Trace::frames_correct() const {
  uint64_t n = 0;
  for (uint8_t f : frame_flags) n += (f == kFrameCorrect);
  return n;
}

double Trace::mean_windowed_accuracy() const {
  if (windows.empty()) return 0.0;
  double s = 0;
  for (const auto& w : windows) s += w.accuracy;
  return s / static_cast<double>(windows.size());
}

std::vector<WindowStat> windowed_accuracy(std::span<const uint8_t> flags, int fps,
                                          double duration_s, double window_s) {
  if (fps < 1 || !(duration_s > 0) || !(window_s > 0)) {
    throw ConfigError("windowed accuracy needs positive fps/duration/window");
  }
  int nw = std::max(1, static_cast<int>(std::ceil(duration_s / window_s - 1e-9)));
  std::vector<WindowStat> out(nw);
  for (int i = 0; i < nw; ++i) {
    out[i].index = i;
    out[i].start_s = i * window_s;
    out[i].end_s = std::min((i + 1) * window_s, duration_s);
  }
  for (size_t f = 0; f < flags.size(); ++f) {
    double t = static_cast<double>(f) / fps;
    int wi = std::min(nw - 1, static_cast<int>(t / window_s));
    out[wi].frames++;
    if (flags[f] == kFrameDropped) out[wi].dropped++;
    if (flags[f] == kFrameCorrect) out[wi].correct++;
  }
  for (auto& w : out) {
    w.accuracy = w.frames == 0
                     ? 0.0
                     : static_cast<double>(w.correct) / static_cast<double>(w.frames);
  }
  return out;
}

std::vector<double> recovery_times(const Trace& tr, std::span<const double> drift_truth,
                                   double tolerance) {
  std::vector<double> out;
  out.reserve(drift_truth.size());
  for (size_t i = 0; i < drift_truth.size(); ++i) {
    double d = drift_truth[i];
    double prev = i == 0 ? 0.0 : drift_truth[i - 1];
    double censor = i + 1 < drift_truth.size() ? drift_truth[i + 1] : tr.duration_s;
    double base = 0;
    int cnt = 0;
    for (const auto& w : tr.windows) {
      if (w.start_s >= prev - 1e-9 && w.end_s <= d + 1e-9) {
        base += w.accuracy;
        ++cnt;
      }
    }
    if (cnt == 0) {
      out.push_back(censor - d);
      continue;
    }
    base /= cnt;
    double rec = censor - d;
    for (const auto& w : tr.windows) {
      if (w.start_s < d - 1e-9 || w.end_s > censor + 1e-9) continue;
      if (w.accuracy >= base - tolerance) {
        rec = w.end_s - d;
        break;
      }
    }
    out.push_back(rec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cost model.

PerfCostModel::PerfCostModel(perf::ModelSpec student, perf::ModelSpec teacher,
                             fabric::Partition part, const Config& cfg)
    : student_(std::move(student)), teacher_(std::move(teacher)), part_(part), cfg_(cfg) {
  student_.validate();
  teacher_.validate();
  cfg_.validate();
}

uint64_t PerfCostModel::train_batch_cycles(int batch) const {
  perf::KernelJob j = perf::make_job(perf::KernelKind::Retraining, student_, batch);
  j.precision = cfg_.retrain_precision;
  return perf::job_cycles(j, part_.top_rows);
}

uint64_t PerfCostModel::validate_cycles(int count) const {
  if (count == 0) return 0;
  perf::KernelJob j = perf::make_job(perf::KernelKind::Validation, student_, count);
  j.precision = cfg_.infer_precision;
  return perf::job_cycles(j, part_.top_rows);
}

uint64_t PerfCostModel::label_cycles(int count) const {
  if (count == 0) return 0;
  auto launch = [&](int batch) {
    perf::KernelJob teach = perf::make_job(perf::KernelKind::Labeling, teacher_, batch);
    teach.precision = cfg_.infer_precision;
    perf::KernelJob probe = perf::make_job(perf::KernelKind::Inference, student_, batch);
    probe.precision = cfg_.infer_precision;
    return perf::job_cycles(teach, part_.top_rows) + perf::job_cycles(probe, part_.top_rows);
  };
  const int b = cfg_.label_batch;
  uint64_t cycles = static_cast<uint64_t>(count / b) * launch(b);
  if (count % b != 0) cycles += launch(count % b);
  return cycles;
}

uint64_t PerfCostModel::frame_cycles() const {
  perf::KernelJob j = perf::make_job(perf::KernelKind::Inference, student_, 1);
  j.precision = cfg_.infer_precision;
  return perf::job_cycles(j, part_.bottom_rows);
}

// ---------------------------------------------------------------------------
// Live backend.

SimBackend::SimBackend(stream::Scenario sc, uint64_t run_seed, learn::Mlp student,
                       learn::Mlp teacher, const Config& cfg)
    : scenario_(std::move(sc)),
      stream_seed_(stream::stream_seed(run_seed)),
      student_(std::move(student)),
      teacher_(std::move(teacher)),
      student_cache_(learn::cache_weights(student_, cfg.infer_precision)),
      teacher_cache_(learn::cache_weights(teacher_, cfg.infer_precision)),
      cfg_(cfg) {}

void SimBackend::retrain(const SampleSet& train, int epochs) {
  std::span<const Sample> s(train);
  for (int e = 0; e < epochs; ++e) {
    for (size_t i = 0; i < s.size(); i += cfg_.train_batch) {
      size_t n = std::min<size_t>(cfg_.train_batch, s.size() - i);
      learn::train_step(student_, s.subspan(i, n), cfg_.lr, cfg_.retrain_precision);
    }
  }
  student_cache_ = learn::cache_weights(student_, cfg_.infer_precision);
}

double SimBackend::validate(const SampleSet& val) {
  return learn::evaluate(student_, val, cfg_.infer_precision, learn::LabelSource::Teacher);
}

Sample SimBackend::label_at(double t) {
  Sample s = stream::draw_sample(scenario_, stream_seed_, t);
  Matrix x = learn::features_of({&s, 1});
  s.teacher_label = learn::predict_cached(teacher_cache_, x)[0];
  return s;
}

double SimBackend::agreement(const SampleSet& labeled) {
  return learn::evaluate(student_, labeled, cfg_.infer_precision, learn::LabelSource::Teacher);
}

void SimBackend::classify_frames(uint64_t first, uint64_t count, std::vector<uint8_t>& out) {
  out.resize(count);
  constexpr uint64_t kChunk = 512;
  std::vector<int> truth;
  for (uint64_t c0 = 0; c0 < count; c0 += kChunk) {
    const int n = static_cast<int>(std::min(kChunk, count - c0));
    Matrix x(n, kFeatureDim);
    truth.assign(n, -1);
    for (int i = 0; i < n; ++i) {
      double t = static_cast<double>(first + c0 + i) / cfg_.fps;
      Sample s = stream::draw_sample(scenario_, stream_seed_, t);
      truth[i] = s.true_label;
      std::memcpy(&x.at(i, 0), s.features.data(), kFeatureDim * sizeof(float));
    }
    auto pred = learn::predict_cached(student_cache_, x);
    for (int i = 0; i < n; ++i) out[c0 + i] = pred[i] == truth[i] ? 1 : 0;
  }
}

// ---------------------------------------------------------------------------
// Policy runners.

namespace {

// Frame admission against the bottom slice.  Arrival instants and busy spans
// are tracked in cycle*fps units so the comparison against the per-frame
// period stays exact.
struct FrameEngine {
  Backend& be;
  Trace& tr;
  uint64_t clock_hz;
  int fps;
  uint64_t busy_units;  // frame_cycles * fps
  bool always_late;
  uint64_t engine_free = 0;
  uint64_t cursor = 0;
  std::vector<uint8_t> scratch;

  FrameEngine(Backend& b, Trace& t, const Config& cfg, const CostModel& cm)
      : be(b),
        tr(t),
        clock_hz(cfg.clock_hz),
        fps(cfg.fps),
        busy_units(cm.frame_cycles() * static_cast<uint64_t>(cfg.fps)),
        always_late(cm.frame_cycles() * static_cast<uint64_t>(cfg.fps) > cfg.clock_hz) {}

  // Classify (with the weights live right now) every frame arriving strictly
  // before cycle_limit.  Runners call this before each weight swap.
  void finalize_until(uint64_t cycle_limit) {
    uint64_t frames = tr.frame_flags.size();
    uint64_t count =
        std::min(frames, ceil_div(cycle_limit * static_cast<uint64_t>(fps), clock_hz));
    if (count <= cursor) return;
    uint64_t n = count - cursor;
    be.classify_frames(cursor, n, scratch);
    for (uint64_t k = 0; k < n; ++k) {
      uint64_t i = cursor + k;
      uint64_t arrival = i * clock_hz;
      uint8_t flag = kFrameDropped;
      if (engine_free <= arrival) {
        engine_free = arrival + busy_units;
        if (!always_late) flag = scratch[k] ? kFrameCorrect : kFrameWrong;
      }
      tr.frame_flags[i] = flag;
    }
    cursor = count;
  }
};

struct RetrainPlan {
  int total = 0, v = 0, t = 0;
  uint64_t cycles = 0;
};

// Mirrors both the buffer draw split and the backend's minibatch chunking,
// so the charged cycles match the work actually submitted.
RetrainPlan plan_draw(const CostModel& cm, const Config& cfg, int avail, int want_t,
                      int want_v) {
  RetrainPlan p;
  p.total = std::min(want_t + want_v, avail);
  p.v = std::min(want_v, p.total / 4);
  p.t = p.total - p.v;
  uint64_t per_epoch = 0;
  for (int i = 0; i < p.t; i += cfg.train_batch) {
    per_epoch += cm.train_batch_cycles(std::min(cfg.train_batch, p.t - i));
  }
  p.cycles = per_epoch * static_cast<uint64_t>(cfg.epochs);
  if (p.v > 0) p.cycles += cm.validate_cycles(p.v);
  return p;
}

SampleSet collect_labels(Backend& be, Rng& rng, int count, double s0, double s1) {
  std::vector<double> times(count);
  for (auto& t : times) t = s0 + rng.next_unit() * (s1 - s0);
  std::sort(times.begin(), times.end());
  SampleSet out;
  out.reserve(count);
  for (double t : times) out.push_back(be.label_at(t));
  return out;
}

Trace make_trace(const Config& cfg, fabric::Partition part, double duration_s,
                 double metric_window_s) {
  if (!(duration_s > 0)) throw ConfigError("duration must be positive");
  if (!(metric_window_s > 0)) throw ConfigError("metric window must be positive");
  Trace tr;
  tr.duration_s = duration_s;
  tr.fps = cfg.fps;
  tr.clock_hz = cfg.clock_hz;
  tr.window_s = metric_window_s;
  tr.partition = part;
  uint64_t frames = static_cast<uint64_t>(std::ceil(duration_s * cfg.fps - 1e-9));
  tr.frame_flags.assign(frames, kFrameDropped);
  return tr;
}

}  // namespace

Trace run_spatiotemporal(Backend& be, const CostModel& cm, const Config& cfg,
                         fabric::Partition part, double duration_s, uint64_t seed,
                         double metric_window_s) {
  cfg.validate();
  Trace tr = make_trace(cfg, part, duration_s, metric_window_s);
  const uint64_t dur_c = static_cast<uint64_t>(std::llround(duration_s * cfg.clock_hz));
  FrameEngine fe(be, tr, cfg, cm);
  Rng rbuf = derive_stream(seed, "buffer-draw");
  Rng rlab = derive_stream(seed, "label-times");
  stream::SampleBuffer buf(cfg.buffer_capacity);
  uint64_t now = 0;
  auto sec = [&](uint64_t c) { return static_cast<double>(c) / static_cast<double>(cfg.clock_hz); };

  // Bootstrap: a labeling phase seeds the empty buffer.
  const uint64_t lab_cost = cm.label_cycles(cfg.n_l);
  if (now + lab_cost <= dur_c) {
    auto dl = collect_labels(be, rlab, cfg.n_l, sec(now), sec(now + lab_cost));
    double acc_l = be.agreement(dl);
    buf.update(dl);
    tr.phases.push_back({PhaseKind::Label, sec(now), sec(now + lab_cost), lab_cost, acc_l, false});
    now += lab_cost;
  }

  const uint64_t ext_cost = cm.label_cycles(cfg.n_ldd - cfg.n_l);
  while (buf.size() > 0) {
    RetrainPlan plan = plan_draw(cm, cfg, static_cast<int>(buf.size()), cfg.n_t, cfg.n_v);
    if (plan.t == 0) break;
    // Reserve the worst case up front so no phase ever straddles the end.
    if (now + plan.cycles + lab_cost + ext_cost > dur_c) break;

    fe.finalize_until(now + plan.cycles);
    auto [dt, dv] = stream::get_data(buf, cfg.n_t, cfg.n_v, rbuf);
    be.retrain(dt, cfg.epochs);
    double acc_v = dv.empty() ? 0.0 : be.validate(dv);
    tr.phases.push_back(
        {PhaseKind::Retrain, sec(now), sec(now + plan.cycles), plan.cycles, acc_v, false});
    now += plan.cycles;

    uint64_t lstart = now;
    auto dl = collect_labels(be, rlab, cfg.n_l, sec(now), sec(now + lab_cost));
    double acc_l = be.agreement(dl);
    bool drift = detect_drift(acc_l, acc_v, cfg.v_thr);
    uint64_t lend = now + lab_cost;
    if (drift) {
      tr.drift_events_s.push_back(sec(lend));
      buf.reset();
      auto ext = collect_labels(be, rlab, cfg.n_ldd - cfg.n_l, sec(lend), sec(lend + ext_cost));
      dl.insert(dl.end(), ext.begin(), ext.end());
      lend += ext_cost;
    }
    buf.update(dl);
    tr.phases.push_back(
        {PhaseKind::Label, sec(lstart), sec(lend), lend - lstart, acc_l, drift});
    now = lend;
  }

  fe.finalize_until(dur_c);
  tr.windows = windowed_accuracy(tr.frame_flags, cfg.fps, duration_s, metric_window_s);
  return tr;
}

namespace {

Trace run_window_policy(Backend& be, const CostModel& cm, const Config& cfg,
                        fabric::Partition part, double duration_s, uint64_t seed,
                        double metric_window_s, double policy_window_s, bool whole_buffer) {
  cfg.validate();
  if (!(policy_window_s > 0)) throw ConfigError("policy window must be positive");
  Trace tr = make_trace(cfg, part, duration_s, metric_window_s);
  const uint64_t dur_c = static_cast<uint64_t>(std::llround(duration_s * cfg.clock_hz));
  const uint64_t win_c = static_cast<uint64_t>(std::llround(policy_window_s * cfg.clock_hz));
  if (win_c == 0) throw ConfigError("policy window shorter than one cycle");
  FrameEngine fe(be, tr, cfg, cm);
  Rng rbuf = derive_stream(seed, "buffer-draw");
  Rng rlab = derive_stream(seed, "label-times");
  stream::SampleBuffer buf(cfg.buffer_capacity);
  auto sec = [&](uint64_t c) { return static_cast<double>(c) / static_cast<double>(cfg.clock_hz); };

  for (uint64_t wstart = 0; wstart < dur_c; wstart += win_c) {
    const uint64_t wend = std::min(wstart + win_c, dur_c);
    uint64_t now = wstart;

    if (buf.size() > 0) {
      int want_t = cfg.n_t, want_v = cfg.n_v;
      if (whole_buffer) {
        int b = static_cast<int>(buf.size());
        want_t = b - b / 4;
        want_v = want_t / 3;
      }
      RetrainPlan plan = plan_draw(cm, cfg, static_cast<int>(buf.size()), want_t, want_v);
      if (plan.t > 0 && now + plan.cycles <= wend) {
        fe.finalize_until(now + plan.cycles);
        auto [dt, dv] = stream::get_data(buf, want_t, want_v, rbuf);
        be.retrain(dt, cfg.epochs);
        double acc_v = dv.empty() ? 0.0 : be.validate(dv);
        tr.phases.push_back(
            {PhaseKind::Retrain, sec(now), sec(now + plan.cycles), plan.cycles, acc_v, false});
        now += plan.cycles;
      }
    }

    // Labeling fills whatever the window has left.
    const uint64_t rem = wend - now;
    const uint64_t one = cm.label_cycles(1);
    int fit;
    if (one == 0) {
      fit = cfg.n_l;  // degenerate (free labels): take one routine budget
    } else {
      uint64_t lo = 0, hi = rem / one + 1;
      while (lo < hi) {
        uint64_t mid = lo + (hi - lo + 1) / 2;
        if (mid <= static_cast<uint64_t>(std::numeric_limits<int>::max()) &&
            cm.label_cycles(static_cast<int>(mid)) <= rem) {
          lo = mid;
        } else {
          hi = mid - 1;
        }
      }
      fit = static_cast<int>(lo);
    }
    if (fit > 0) {
      uint64_t lc = cm.label_cycles(fit);
      auto dl = collect_labels(be, rlab, fit, sec(now), sec(now + lc));
      double acc_l = be.agreement(dl);
      tr.phases.push_back({PhaseKind::Label, sec(now), sec(now + lc), lc, acc_l, false});
      buf.update(dl);
      now += lc;
    }
  }

  fe.finalize_until(dur_c);
  tr.windows = windowed_accuracy(tr.frame_flags, cfg.fps, duration_s, metric_window_s);
  return tr;
}

}  // namespace

Trace run_spatial_only(Backend& be, const CostModel& cm, const Config& cfg,
                       fabric::Partition part, double duration_s, uint64_t seed,
                       double metric_window_s, double policy_window_s) {
  return run_window_policy(be, cm, cfg, part, duration_s, seed, metric_window_s,
                           policy_window_s, false);
}

Trace run_fixed_window(Backend& be, const CostModel& cm, const Config& cfg,
                       fabric::Partition part, double duration_s, uint64_t seed,
                       double metric_window_s, double policy_window_s) {
  return run_window_policy(be, cm, cfg, part, duration_s, seed, metric_window_s,
                           policy_window_s, true);
}

PretrainSetup pretrain_models(const stream::Scenario& sc, uint64_t run_seed,
                              const PretrainParams& pp) {
  pp.student_spec.validate();
  pp.teacher_spec.validate();
  for (const auto* spec : {&pp.student_spec, &pp.teacher_spec}) {
    if (spec->input_dim() != kFeatureDim || spec->output_dim() != kClassCount) {
      throw ConfigError("model '" + spec->name + "' must map " + std::to_string(kFeatureDim) +
                        " features to " + std::to_string(kClassCount) + " classes");
    }
  }
  Rng rd = derive_stream(run_seed, "pretrain-data");
  uint64_t sseed = stream::stream_seed(run_seed);
  SampleSet everywhere, opening;
  double t0 = 0;
  for (size_t i = 0; i < sc.segments.size(); ++i) {
    double d = sc.segments[i].duration_s;
    for (int k = 0; k < pp.samples_per_segment; ++k) {
      double t = t0 + rd.next_unit() * d;
      Sample s = stream::draw_sample(sc, sseed, t);
      everywhere.push_back(s);
      if (i == 0) opening.push_back(s);
    }
    t0 += d;
  }
  Rng rs = derive_stream(run_seed, "student-init");
  Rng rt = derive_stream(run_seed, "teacher-init");
  PretrainSetup out{learn::make_mlp(pp.student_spec, rs), learn::make_mlp(pp.teacher_spec, rt)};
  Rng rto = derive_stream(run_seed, "teacher-order");
  Rng rso = derive_stream(run_seed, "student-order");
  learn::pretrain(out.teacher, everywhere, pp.teacher_steps, pp.lr, pp.batch, rto);
  learn::pretrain(out.student, opening, pp.student_steps, pp.lr, pp.batch, rso);
  return out;
}

}  // namespace dacapo::sched
