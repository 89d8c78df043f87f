#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dacapo/kernels.hpp"
#include "dacapo/mx.hpp"

namespace dacapo::fabric {

inline constexpr int kArrayRows = 16;
inline constexpr int kArrayCols = 16;
inline constexpr uint64_t kSramBytes = 96 * 1024;
inline constexpr uint64_t kDefaultClockHz = 500'000'000ULL;
inline constexpr int kPackedBlockBytes = 20;

// Static row split of the 16x16 engine grid.  The top slice runs training
// and labeling work, the bottom slice runs the inference stream; the two
// halves share nothing but the config register.
struct Partition {
  int top_rows = 8;
  int bottom_rows = 8;
};

// Throws ConfigError unless both slices get at least one row.
Partition make_partition(int top_rows);

struct GemmShape {
  int64_t m = 1, k = 1, n = 1;
};

enum class Slice { Top, Bottom };

struct CycleReport {
  uint64_t fill = 0;     // operand skew into the array, per tile
  uint64_t compute = 0;  // engine-busy cycles
  uint64_t drain = 0;    // result offload, one element per column per cycle
  uint64_t total = 0;
  uint64_t tiles = 0;
};

// Closed-form cycle count for C(m,n) = A(m,k) B(k,n) on an output-stationary
// sa_rows x sa_cols slice.  Edge tiles are padded to full size, so every tile
// costs the same.
CycleReport gemm_cycles(const GemmShape& s, int sa_rows, int sa_cols, mx::Precision p);

// Cycle-stepped simulation of the same array: per-engine start/finish events
// plus an explicit drain queue per column.  Independent of the closed form;
// used to cross-check it.  Dims are capped (m,k,n <= 256) to keep it honest
// but affordable.
CycleReport simulate_gemm(const GemmShape& s, int sa_rows, int sa_cols, mx::Precision p);

// Peak staging footprint of one tile (operand blocks double-buffered plus the
// fp32 output tile).  Checked against kSramBytes on every launch.
uint64_t tile_footprint_bytes(int sa_rows, int sa_cols);

struct GemmJob {
  GemmShape shape;
  mx::Precision precision = mx::Precision::MX6;
  // Optional numeric payload; when present the job also produces C = A*B.
  const Matrix* a = nullptr;
  const Matrix* b = nullptr;
};

struct JobResult {
  CycleReport report;
  std::optional<Matrix> output;
};

struct SliceRun {
  std::vector<JobResult> jobs;
  uint64_t busy_cycles = 0;
};

// Runs the two work queues on their slices.  Queues are serviced in order
// within a slice; slices advance independently, so neither queue's cycle
// counts or outputs can depend on the other's contents.
class Fabric {
 public:
  explicit Fabric(Partition p) : part_(p) {}

  const Partition& partition() const { return part_; }
  void set_partition(Partition p) { part_ = p; }

  std::pair<SliceRun, SliceRun> run_concurrent(std::span<const GemmJob> top,
                                               std::span<const GemmJob> bottom) const;

 private:
  SliceRun run_slice(std::span<const GemmJob> q, int rows) const;
  Partition part_;
};

// Re-blocking of a result tile for the consumer of the next kernel: inference
// chains need row blocks only; training consumers read the same values both
// row- and column-blocked.
struct ConvertedOutputs {
  mx::Tensor row;
  std::optional<mx::Tensor> col;
};

ConvertedOutputs convert_outputs(const Matrix& c, mx::Precision p, bool for_training);

}  // namespace dacapo::fabric
