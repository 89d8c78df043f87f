#include "dacapo/fabric.hpp"

#include <algorithm>
#include <string>

namespace dacapo::fabric {

Partition make_partition(int top_rows) {
  if (top_rows < 1 || top_rows > kArrayRows - 1) {
    throw ConfigError("partition rows must leave both slices non-empty (got " +
                      std::to_string(top_rows) + " of " + std::to_string(kArrayRows) + ")");
  }
  return Partition{top_rows, kArrayRows - top_rows};
}

namespace {

void check_args(const GemmShape& s, int sa_rows, int sa_cols) {
  if (s.m < 1 || s.k < 1 || s.n < 1) throw Error("gemm dims must be >= 1");
  if (sa_rows < 1 || sa_rows > kArrayRows || sa_cols < 1 || sa_cols > kArrayCols) {
    throw Error("slice dims out of range");
  }
  uint64_t need = tile_footprint_bytes(sa_rows, sa_cols);
  if (need > kSramBytes) throw Error("tile footprint exceeds on-chip buffer");
}

}  // namespace

uint64_t tile_footprint_bytes(int sa_rows, int sa_cols) {
  // Two operand block columns/rows in flight (double buffered) plus the
  // accumulated fp32 output tile.
  uint64_t operands = 2ull * (sa_rows + sa_cols) * kPackedBlockBytes * 2;
  uint64_t outputs = static_cast<uint64_t>(sa_rows) * sa_cols * sizeof(float);
  return operands + outputs;
}

CycleReport gemm_cycles(const GemmShape& s, int sa_rows, int sa_cols, mx::Precision p) {
  check_args(s, sa_rows, sa_cols);
  CycleReport r;
  uint64_t steps = ceil_div(static_cast<uint64_t>(s.k), mx::kBlockSize);
  uint64_t per_tile_compute = steps * mx::dpe_cycles(p);
  r.tiles = ceil_div(static_cast<uint64_t>(s.m), sa_rows) *
            ceil_div(static_cast<uint64_t>(s.n), sa_cols);
  r.fill = r.tiles * static_cast<uint64_t>(sa_rows + sa_cols - 2);
  r.compute = r.tiles * per_tile_compute;
  r.drain = r.tiles * static_cast<uint64_t>(sa_rows);
  r.total = r.fill + r.compute + r.drain;
  return r;
}

CycleReport simulate_gemm(const GemmShape& s, int sa_rows, int sa_cols, mx::Precision p) {
  check_args(s, sa_rows, sa_cols);
  if (s.m > 256 || s.k > 256 || s.n > 256) {
    throw Error("simulate_gemm is capped at 256 per dim");
  }
  const int steps = static_cast<int>(ceil_div(static_cast<uint64_t>(s.k), mx::kBlockSize));
  const int block_cycles = steps * mx::dpe_cycles(p);

  CycleReport r;
  for (int64_t tm = 0; tm < s.m; tm += sa_rows) {
    for (int64_t tn = 0; tn < s.n; tn += sa_cols) {
      ++r.tiles;
      // Wavefront: engine (i,j) sees its first operand pair after i+j cycles
      // of skew, then stays busy for block_cycles.
      int last_finish = 0;
      for (int i = 0; i < sa_rows; ++i) {
        for (int j = 0; j < sa_cols; ++j) {
          int start = i + j;
          last_finish = std::max(last_finish, start + block_cycles);
        }
      }
      // Offload: each column pushes its results down one per cycle.
      int drain = 0;
      for (int j = 0; j < sa_cols; ++j) {
        int pending = sa_rows;
        int col_cycles = 0;
        while (pending > 0) {
          --pending;
          ++col_cycles;
        }
        drain = std::max(drain, col_cycles);
      }
      r.fill += static_cast<uint64_t>(last_finish - block_cycles);
      r.compute += static_cast<uint64_t>(block_cycles);
      r.drain += static_cast<uint64_t>(drain);
    }
  }
  r.total = r.fill + r.compute + r.drain;
  return r;
}

SliceRun Fabric::run_slice(std::span<const GemmJob> q, int rows) const {
  SliceRun run;
  run.jobs.reserve(q.size());
  for (const GemmJob& job : q) {
    JobResult jr;
    jr.report = gemm_cycles(job.shape, rows, kArrayCols, job.precision);
    if (job.a && job.b) {
      if (job.a->rows != job.shape.m || job.a->cols != job.shape.k ||
          job.b->rows != job.shape.k || job.b->cols != job.shape.n) {
        throw Error("gemm job payload dims disagree with shape");
      }
      jr.output = mx_matmul_serial(*job.a, *job.b, job.precision);
    }
    run.busy_cycles += jr.report.total;
    run.jobs.push_back(std::move(jr));
  }
  return run;
}

std::pair<SliceRun, SliceRun> Fabric::run_concurrent(std::span<const GemmJob> top,
                                                     std::span<const GemmJob> bottom) const {
  return {run_slice(top, part_.top_rows), run_slice(bottom, part_.bottom_rows)};
}

ConvertedOutputs convert_outputs(const Matrix& c, mx::Precision p, bool for_training) {
  ConvertedOutputs out;
  out.row = mx::quantize(c, p, mx::Major::Row);
  if (for_training) out.col = mx::quantize(c, p, mx::Major::Col);
  return out;
}

}  // namespace dacapo::fabric
