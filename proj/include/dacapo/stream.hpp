#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <string>
#include <utility>
#include <vector>

#include "dacapo/common.hpp"
#include "dacapo/rng.hpp"
#include "dacapo/sample.hpp"

namespace dacapo::stream {

// Piecewise-stationary synthetic feature stream.  Classes are Gaussian
// clusters in 16-d whose centers are derived from the run seed, so every
// seed poses a fresh task.  A segment can shift the input geometry
// (covariate drift), move every class onto a fresh center set (concept
// drift, keyed by concept_seed), or reweight label frequencies.  Fresh
// centers rather than a permutation keep the task consistent: old and new
// regimes occupy different feature regions, so a model trained on both never
// sees the same input with two labels.
//
// Draws are keyed by (seed, t): the sample at a given instant is a pure
// function of the scenario, independent of query order.

struct CovariateShift {
  float mean_offset = 0.0f;  // added to every feature
  float scale = 1.0f;        // multiplies every feature
};

struct Segment {
  double duration_s = 0.0;
  std::array<double, kClassCount> priors{};  // normalized on scenario build
  CovariateShift shift;
  uint64_t concept_seed = 0;  // 0 = identity center assignment
};

struct Scenario {
  std::string name;
  std::vector<Segment> segments;

  double total_duration() const;
  // Segment boundaries strictly inside (0, total): the drift instants.
  std::vector<double> boundaries() const;
  int segment_at(double t) const;  // throws Error for t outside [0, total)
};

// Uniform priors helper.
std::array<double, kClassCount> uniform_priors();

// Scenario presets: s1..s6 are 20-minute two/three-phase drifts of increasing
// sharpness; es1/es2 chain four 5-minute segments with compound drifts.
Scenario make_preset(const std::string& name, double duration_s = 1200.0);
bool is_preset_name(const std::string& name);
std::vector<std::string> preset_names();

Scenario normalize_scenario(Scenario s);  // validates + normalizes priors

// Class center for a label within one concept regime (0 = base regime).
std::array<float, kFeatureDim> class_center(uint64_t seed, uint64_t concept_seed, int label);

// The sample observed at instant t.
Sample draw_sample(const Scenario& sc, uint64_t seed, double t);

// Stream keyed off a run seed; shared by live draws, pretraining sets and
// every policy under comparison.
uint64_t stream_seed(uint64_t run_seed);

// FIFO of labeled samples with bounded capacity.
class SampleBuffer {
 public:
  explicit SampleBuffer(size_t capacity);

  void update(const SampleSet& batch);  // append, evicting oldest on overflow
  void reset();
  size_t size() const { return entries_.size(); }
  size_t capacity() const { return capacity_; }
  const std::deque<Sample>& entries() const { return entries_; }

 private:
  size_t capacity_;
  std::deque<Sample> entries_;
};

// Draws min(n_t + n_v, buffered) samples without replacement and splits them
// into a train set and a validation set, keeping the 3:1 proportion when the
// buffer runs short.  Requires n_v == n_t / 3 (floor); throws ConfigError
// otherwise, Error if the buffer is empty.
std::pair<SampleSet, SampleSet> get_data(const SampleBuffer& buf, int n_t, int n_v, Rng& rng);

}  // namespace dacapo::stream
