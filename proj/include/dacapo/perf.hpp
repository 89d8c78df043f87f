#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dacapo/fabric.hpp"
#include "dacapo/mx.hpp"

namespace dacapo::perf {

struct LayerDims {
  int in_features = 0;
  int out_features = 0;
};

// Fully connected stack; layer i's outputs feed layer i+1.
struct ModelSpec {
  std::string name;
  std::vector<LayerDims> layers;

  void validate() const;  // throws ConfigError on empty/broken chains
  int input_dim() const { return layers.front().in_features; }
  int output_dim() const { return layers.back().out_features; }
  int64_t param_count() const;
};

enum class KernelKind { Inference, Labeling, Retraining, Validation };

const char* kernel_kind_name(KernelKind k);

// Retraining runs at the wide precision, everything else at the mid one.
mx::Precision default_precision(KernelKind k);

struct KernelJob {
  KernelKind kind = KernelKind::Inference;
  ModelSpec model;
  int batch = 1;
  mx::Precision precision = mx::Precision::MX6;
};

KernelJob make_job(KernelKind kind, const ModelSpec& model, int batch);

struct LoweredJob {
  std::vector<fabric::GemmShape> gemms;
  mx::Precision precision;
  // Optimizer applies one MAC per parameter on a single engine row.
  uint64_t update_cycles = 0;
};

// Forward pass: one (batch, in, out) GEMM per layer.  Retraining adds, per
// layer, the activation-gradient GEMM (batch, out, in) and the
// weight-gradient GEMM (in, batch, out), then the elementwise update.
LoweredJob lower_to_gemms(const KernelJob& job);

uint64_t job_cycles(const KernelJob& job, int sa_rows);

// Smallest top-slice height whose leftover bottom slice still sustains the
// frame rate for single-frame inference.  Throws InfeasibleError when even
// 15 rows of bottom slice cannot keep up.
fabric::Partition spatial_allocate(const ModelSpec& student, int fps,
                                   uint64_t clock_hz = fabric::kDefaultClockHz);

}  // namespace dacapo::perf
