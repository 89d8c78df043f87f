#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "dacapo/fabric.hpp"
#include "dacapo/learner.hpp"
#include "dacapo/perf.hpp"
#include "dacapo/stream.hpp"

namespace dacapo::sched {

// Knobs of the continuous-learning control loop.  The derived-quantity
// constraints (n_v is a third of n_t, the drift labeling budget is four
// times the routine one) are enforced, not assumed.
struct Config {
  int n_t = 90;                 // samples drawn for one retrain
  int n_v = 30;                 // held out for validation, n_t / 3
  int n_l = 128;                // labels collected per routine phase
  int n_ldd = 512;              // total labels when drift is confirmed, 4 * n_l
  double v_thr = -0.10;         // drift when acc_l - acc_v drops below this
  int buffer_capacity = 600;
  int epochs = 1;               // passes over the drawn train set per phase
  int train_batch = 16;
  int label_batch = 1;          // samples per teacher launch when labeling
  float lr = 1e-3f;
  uint64_t clock_hz = fabric::kDefaultClockHz;
  int fps = 30;
  mx::Precision infer_precision = mx::Precision::MX6;
  mx::Precision retrain_precision = mx::Precision::MX9;

  void validate() const;  // throws ConfigError
};

bool detect_drift(double acc_l, double acc_v, double v_thr);

enum class PhaseKind { Retrain, Label, Validate };
const char* phase_kind_name(PhaseKind k);

struct PhaseReport {
  PhaseKind kind;
  double start_s = 0;
  double end_s = 0;
  uint64_t cycles = 0;
  // Retrain phases carry the validation accuracy; label phases carry the
  // student/teacher agreement.
  double acc = 0;
  bool drift = false;
};

struct WindowStat {
  int index = 0;
  double start_s = 0;
  double end_s = 0;
  uint64_t frames = 0;
  uint64_t dropped = 0;
  uint64_t correct = 0;
  double accuracy = 0;  // dropped frames count against it
};

// Per-frame outcome in arrival order.
enum : uint8_t { kFrameDropped = 0, kFrameCorrect = 1, kFrameWrong = 2 };

struct Trace {
  double duration_s = 0;
  int fps = 0;
  uint64_t clock_hz = 0;
  double window_s = 0;
  fabric::Partition partition;
  std::vector<PhaseReport> phases;
  std::vector<double> drift_events_s;
  std::vector<uint8_t> frame_flags;
  std::vector<WindowStat> windows;

  uint64_t frames_total() const { return frame_flags.size(); }
  uint64_t frames_dropped() const;
  uint64_t frames_correct() const;
  double mean_windowed_accuracy() const;
};

std::vector<WindowStat> windowed_accuracy(std::span<const uint8_t> flags, int fps,
                                          double duration_s, double window_s);

// Seconds from each true drift instant until the first report window at or
// after it whose accuracy is back within `tolerance` of the pre-drift mean.
// Censored at the next drift (or stream end) when recovery never shows.
std::vector<double> recovery_times(const Trace& tr, std::span<const double> drift_truth,
                                   double tolerance = 0.05);

// Numeric side of the loop.  The policy runners own time, budget and buffer
// bookkeeping; a backend owns the models and the stream.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual void retrain(const SampleSet& train, int epochs) = 0;
  virtual double validate(const SampleSet& val) = 0;   // accuracy vs teacher labels
  virtual Sample label_at(double t) = 0;               // draw + teacher-label
  virtual double agreement(const SampleSet& labeled) = 0;
  // Correctness (vs ground truth) of frames [first, first+count) under the
  // current weights; 1 = correct.  Drop accounting happens in the runner.
  virtual void classify_frames(uint64_t first, uint64_t count, std::vector<uint8_t>& out) = 0;
};

// Cycle prices the runners charge against the clock budget.
class CostModel {
 public:
  virtual ~CostModel() = default;
  virtual uint64_t train_batch_cycles(int batch) const = 0;
  virtual uint64_t validate_cycles(int count) const = 0;
  // Per labeled sample: teacher forward plus the student agreement probe.
  virtual uint64_t label_cycles(int count) const = 0;
  virtual uint64_t frame_cycles() const = 0;  // one frame on the bottom slice
};

// Prices every phase through the kernel lowering on the actual partition.
class PerfCostModel : public CostModel {
 public:
  PerfCostModel(perf::ModelSpec student, perf::ModelSpec teacher, fabric::Partition part,
                const Config& cfg);
  uint64_t train_batch_cycles(int batch) const override;
  uint64_t validate_cycles(int count) const override;
  uint64_t label_cycles(int count) const override;
  uint64_t frame_cycles() const override;

 private:
  perf::ModelSpec student_, teacher_;
  fabric::Partition part_;
  Config cfg_;
};

// Live backend: real student/teacher MLPs over a scenario stream.
class SimBackend : public Backend {
 public:
  SimBackend(stream::Scenario sc, uint64_t run_seed, learn::Mlp student, learn::Mlp teacher,
             const Config& cfg);

  void retrain(const SampleSet& train, int epochs) override;
  double validate(const SampleSet& val) override;
  Sample label_at(double t) override;
  double agreement(const SampleSet& labeled) override;
  void classify_frames(uint64_t first, uint64_t count, std::vector<uint8_t>& out) override;

  const learn::Mlp& student() const { return student_; }

 private:
  stream::Scenario scenario_;
  uint64_t stream_seed_;
  learn::Mlp student_;
  learn::Mlp teacher_;
  learn::CachedWeights student_cache_;
  learn::CachedWeights teacher_cache_;
  Config cfg_;
};

// The adaptive policy: retrain as often as the budget allows, probe for
// drift after every labeling phase, and react by flushing the buffer and
// labeling at the boosted budget.
Trace run_spatiotemporal(Backend& be, const CostModel& cm, const Config& cfg,
                         fabric::Partition part, double duration_s, uint64_t seed,
                         double metric_window_s);

// Fixed cadence, no drift reaction: one retrain at each window boundary,
// labeling fills the window remainder.
Trace run_spatial_only(Backend& be, const CostModel& cm, const Config& cfg,
                       fabric::Partition part, double duration_s, uint64_t seed,
                       double metric_window_s, double policy_window_s);

// Like spatial-only but retrains over everything the buffer holds, the
// classic periodic-retraining baseline.
Trace run_fixed_window(Backend& be, const CostModel& cm, const Config& cfg,
                       fabric::Partition part, double duration_s, uint64_t seed,
                       double metric_window_s, double policy_window_s);

// Offline fp32 pretraining of the two models for a scenario: the teacher
// sees ground-truth-labeled draws from every segment, the student only from
// the first one.
struct PretrainSetup {
  learn::Mlp student;
  learn::Mlp teacher;
};

struct PretrainParams {
  perf::ModelSpec student_spec;
  perf::ModelSpec teacher_spec;
  int student_steps = 400;
  int teacher_steps = 1600;
  float lr = 0.05f;
  int batch = 32;
  int samples_per_segment = 160;
};

PretrainSetup pretrain_models(const stream::Scenario& sc, uint64_t run_seed,
                              const PretrainParams& pp);

}  // namespace dacapo::sched
