#include "dacapo/stream.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dacapo::stream {

namespace {

constexpr uint64_t kCenterTag = 0x6365'6e74'6572'7331ULL;
constexpr uint64_t kConceptTag = 0x636f'6e63'6570'7431ULL;
constexpr uint64_t kDrawTag = 0x6472'6177'7374'726dULL;

// Cluster geometry.  Centers spread wide enough that the Bayes error is
// small, so accuracy collapses under a center reshuffle are attributable to
// the model, not the task.
constexpr float kCenterSpread = 1.8f;
constexpr float kNoiseSigma = 1.0f;

}  // namespace

double Scenario::total_duration() const {
  double t = 0;
  for (const auto& s : segments) t += s.duration_s;
  return t;
}

std::vector<double> Scenario::boundaries() const {
  std::vector<double> b;
  double t = 0;
  for (size_t i = 0; i + 1 < segments.size(); ++i) {
    t += segments[i].duration_s;
    b.push_back(t);
  }
  return b;
}

int Scenario::segment_at(double t) const {
  if (t >= 0) {
    double hi = 0;
    for (size_t i = 0; i < segments.size(); ++i) {
      hi += segments[i].duration_s;
      if (t < hi) return static_cast<int>(i);
    }
  }
  throw Error("instant " + std::to_string(t) + " outside scenario");
}

std::array<double, kClassCount> uniform_priors() {
  std::array<double, kClassCount> p;
  p.fill(1.0 / kClassCount);
  return p;
}

Scenario normalize_scenario(Scenario s) {
  if (s.segments.empty()) throw ConfigError("scenario '" + s.name + "' has no segments");
  for (auto& seg : s.segments) {
    if (!(seg.duration_s > 0)) throw ConfigError("scenario segment duration must be positive");
    if (!(seg.shift.scale > 0)) throw ConfigError("covariate scale must be positive");
    double sum = 0;
    for (double p : seg.priors) {
      if (p < 0) throw ConfigError("class priors must be non-negative");
      sum += p;
    }
    if (!(sum > 0)) throw ConfigError("class priors must not all be zero");
    for (double& p : seg.priors) p /= sum;
  }
  return s;
}

std::array<float, kFeatureDim> class_center(uint64_t seed, uint64_t concept_seed, int label) {
  uint64_t key = mix_u64(mix_u64(seed, kCenterTag), mix_u64(concept_seed, kConceptTag));
  Rng rng(mix_u64(key, static_cast<uint64_t>(label)));
  std::array<float, kFeatureDim> c;
  for (auto& v : c) v = kCenterSpread * static_cast<float>(rng.next_gauss());
  return c;
}

uint64_t stream_seed(uint64_t run_seed) { return mix_u64(run_seed, kDrawTag); }

Sample draw_sample(const Scenario& sc, uint64_t seed, double t) {
  const Segment& seg = sc.segments[sc.segment_at(t)];
  Rng rng(mix_u64(mix_u64(seed, kDrawTag), time_key(t)));

  double u = rng.next_unit();
  int label = kClassCount - 1;
  double cdf = 0;
  for (int c = 0; c < kClassCount; ++c) {
    cdf += seg.priors[c];
    if (u < cdf) {
      label = c;
      break;
    }
  }

  auto center = class_center(seed, seg.concept_seed, label);
  Sample s;
  s.true_label = label;
  s.timestamp = t;
  for (int d = 0; d < kFeatureDim; ++d) {
    float x = center[d] + kNoiseSigma * static_cast<float>(rng.next_gauss());
    s.features[d] = x * seg.shift.scale + seg.shift.mean_offset;
  }
  return s;
}

namespace {

Segment make_segment(double dur, std::array<double, kClassCount> priors, CovariateShift shift,
                     uint64_t concept_seed) {
  Segment s;
  s.duration_s = dur;
  s.priors = priors;
  s.shift = shift;
  s.concept_seed = concept_seed;
  return s;
}

std::array<double, kClassCount> skewed_priors() {
  return {0.30, 0.20, 0.15, 0.10, 0.08, 0.07, 0.05, 0.05};
}

}  // namespace

bool is_preset_name(const std::string& name) {
  for (const auto& n : preset_names()) {
    if (n == name) return true;
  }
  return false;
}

std::vector<std::string> preset_names() {
  return {"s1", "s2", "s3", "s4", "s5", "s6", "es1", "es2"};
}

Scenario make_preset(const std::string& name, double duration_s) {
  if (!(duration_s > 0)) throw ConfigError("preset duration must be positive");
  Scenario sc;
  sc.name = name;
  const auto uni = uniform_priors();
  const CovariateShift none{};
  const CovariateShift mild{0.5f, 1.25f};
  const CovariateShift strong{0.9f, 1.6f};

  auto half = duration_s / 2, third = duration_s / 3, quarter = duration_s / 4;
  if (name == "s1") {
    sc.segments = {make_segment(half, uni, none, 0), make_segment(half, uni, mild, 0)};
  } else if (name == "s2") {
    sc.segments = {make_segment(half, uni, none, 0),
                   make_segment(half, skewed_priors(), mild, 0)};
  } else if (name == "s3") {
    sc.segments = {make_segment(half, uni, none, 0), make_segment(half, uni, none, 11)};
  } else if (name == "s4") {
    sc.segments = {make_segment(third, uni, none, 0), make_segment(third, uni, strong, 0),
                   make_segment(third, uni, strong, 12)};
  } else if (name == "s5") {
    sc.segments = {make_segment(third, uni, none, 0), make_segment(third, uni, none, 13),
                   make_segment(third, uni, none, 14)};
  } else if (name == "s6") {
    sc.segments = {make_segment(third, uni, none, 0),
                   make_segment(third, skewed_priors(), strong, 15),
                   make_segment(third, uni, mild, 16)};
  } else if (name == "es1") {
    sc.segments = {make_segment(quarter, uni, none, 0), make_segment(quarter, uni, mild, 0),
                   make_segment(quarter, uni, mild, 21),
                   make_segment(quarter, skewed_priors(), strong, 22)};
  } else if (name == "es2") {
    sc.segments = {make_segment(quarter, uni, none, 0),
                   make_segment(quarter, skewed_priors(), none, 31),
                   make_segment(quarter, uni, strong, 32),
                   make_segment(quarter, uni, mild, 33)};
  } else {
    throw ConfigError("unknown scenario preset '" + name + "'");
  }
  return normalize_scenario(std::move(sc));
}

SampleBuffer::SampleBuffer(size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("sample buffer capacity must be >= 1");
}

void SampleBuffer::update(const SampleSet& batch) {
  for (const Sample& s : batch) {
    if (!s.labeled()) throw Error("buffer accepts labeled samples only");
    if (entries_.size() == capacity_) entries_.pop_front();
    entries_.push_back(s);
  }
}

void SampleBuffer::reset() { entries_.clear(); }

std::pair<SampleSet, SampleSet> get_data(const SampleBuffer& buf, int n_t, int n_v, Rng& rng) {
  if (n_t < 1) throw ConfigError("train draw must request at least one sample");
  if (n_v != n_t / 3) {
    throw ConfigError("validation draw must be a third of the train draw (got " +
                      std::to_string(n_v) + " for " + std::to_string(n_t) + ")");
  }
  if (buf.size() == 0) throw Error("cannot draw from an empty sample buffer");

  const int avail = static_cast<int>(buf.size());
  const int total = std::min(n_t + n_v, avail);
  const int v = std::min(n_v, total / 4);
  const int t = total - v;

  std::vector<int> idx(avail);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < total; ++i) {
    int j = i + static_cast<int>(rng.next_below(static_cast<uint64_t>(avail - i)));
    std::swap(idx[i], idx[j]);
  }

  SampleSet train, val;
  train.reserve(t);
  val.reserve(v);
  for (int i = 0; i < t; ++i) train.push_back(buf.entries()[idx[i]]);
  for (int i = t; i < total; ++i) val.push_back(buf.entries()[idx[i]]);
  return {std::move(train), std::move(val)};
}

}  // namespace dacapo::stream
