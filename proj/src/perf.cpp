#include "dacapo/perf.hpp"

namespace dacapo::perf {

void ModelSpec::validate() const {
  if (layers.empty()) throw ConfigError("model '" + name + "' has no layers");
  for (size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].in_features < 1 || layers[i].out_features < 1) {
      throw ConfigError("model '" + name + "' layer " + std::to_string(i) + " has empty dims");
    }
    if (i > 0 && layers[i].in_features != layers[i - 1].out_features) {
      throw ConfigError("model '" + name + "' layer " + std::to_string(i) +
                        " input does not match previous output");
    }
  }
}

int64_t ModelSpec::param_count() const {
  int64_t n = 0;
  for (const auto& l : layers) n += static_cast<int64_t>(l.in_features) * l.out_features;
  return n;
}

const char* kernel_kind_name(KernelKind k) {
  switch (k) {
    case KernelKind::Inference: return "inference";
    case KernelKind::Labeling: return "labeling";
    case KernelKind::Retraining: return "retraining";
    case KernelKind::Validation: return "validation";
  }
  return "?";
}

mx::Precision default_precision(KernelKind k) {
  return k == KernelKind::Retraining ? mx::Precision::MX9 : mx::Precision::MX6;
}

KernelJob make_job(KernelKind kind, const ModelSpec& model, int batch) {
  if (batch < 1) throw ConfigError("job batch must be >= 1");
  model.validate();
  return KernelJob{kind, model, batch, default_precision(kind)};
}

LoweredJob lower_to_gemms(const KernelJob& job) {
  job.model.validate();
  if (job.batch < 1) throw ConfigError("job batch must be >= 1");
  LoweredJob out;
  out.precision = job.precision;
  const int64_t b = job.batch;
  for (const auto& l : job.model.layers) {
    out.gemms.push_back({b, l.in_features, l.out_features});
  }
  if (job.kind == KernelKind::Retraining) {
    // Walk the stack backwards: dX = dY * W^T, dW = X^T * dY.
    for (auto it = job.model.layers.rbegin(); it != job.model.layers.rend(); ++it) {
      out.gemms.push_back({b, it->out_features, it->in_features});
      out.gemms.push_back({it->in_features, b, it->out_features});
    }
    out.update_cycles = static_cast<uint64_t>(job.model.param_count());
  }
  return out;
}

uint64_t job_cycles(const KernelJob& job, int sa_rows) {
  LoweredJob lowered = lower_to_gemms(job);
  uint64_t total = lowered.update_cycles;
  for (const auto& g : lowered.gemms) {
    total += fabric::gemm_cycles(g, sa_rows, fabric::kArrayCols, lowered.precision).total;
  }
  return total;
}

fabric::Partition spatial_allocate(const ModelSpec& student, int fps, uint64_t clock_hz) {
  if (fps < 1) throw ConfigError("fps must be >= 1");
  if (clock_hz < 1) throw ConfigError("clock must be >= 1 Hz");
  KernelJob frame = make_job(KernelKind::Inference, student, 1);
  for (int bottom = 1; bottom <= fabric::kArrayRows - 1; ++bottom) {
    uint64_t per_frame = job_cycles(frame, bottom);
    // Sustains the stream iff one frame fits inside one frame period.
    if (per_frame * static_cast<uint64_t>(fps) <= clock_hz) {
      return fabric::Partition{fabric::kArrayRows - bottom, bottom};
    }
  }
  throw InfeasibleError("no bottom slice of 1..15 rows sustains " + std::to_string(fps) +
                        " fps at " + std::to_string(clock_hz) + " Hz");
}

}  // namespace dacapo::perf
