#include "dacapo/cli.hpp"

#include <omp.h>

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "dacapo/config.hpp"
#include "dacapo/perf.hpp"
#include "dacapo/trace_io.hpp"
#include "json.hpp"

namespace dacapo::cli {

namespace {

namespace fs = std::filesystem;

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ParseError("cannot create directory " + dir + ": " + ec.message());
}

int cmd_encode(const std::string& in, const std::string& out, const std::string& prec,
               const std::string& major) {
  mx::Precision p = mx::parse_precision(prec);
  mx::Major mj;
  if (major == "row") {
    mj = mx::Major::Row;
  } else if (major == "col") {
    mj = mx::Major::Col;
  } else {
    throw ConfigError("major must be row or col (got '" + major + "')");
  }
  Matrix m = mx::load_matrix_file(in);
  mx::Tensor t = mx::quantize(m, p, mj);
  mx::save_tensor_file(out, t);

  Matrix back = mx::dequantize(t);
  float max_err = 0, max_step = 0;
  for (size_t i = 0; i < m.data.size(); ++i) {
    max_err = std::max(max_err, std::abs(m.data[i] - back.data[i]));
  }
  for (const auto& b : t.blocks) max_step = std::max(max_step, mx::quantization_step(b));
  std::printf("encoded %dx%d as %s/%s: %zu blocks -> %s\n", t.rows, t.cols,
              mx::precision_name(p), major.c_str(), t.blocks.size(), out.c_str());
  std::printf("max_abs_error = %g (worst block step %g)\n", static_cast<double>(max_err),
              static_cast<double>(max_step));
  return 0;
}

int cmd_allocate(const std::string& config_path) {
  cfg::RunConfig rc = cfg::load_config_file(config_path);
  rc.validate();
  fabric::Partition part =
      perf::spatial_allocate(rc.student, rc.sched.fps, rc.sched.clock_hz);
  perf::KernelJob frame = perf::make_job(perf::KernelKind::Inference, rc.student, 1);
  frame.precision = rc.sched.infer_precision;
  nlohmann::json j = {{"top_rows", part.top_rows},
                      {"bottom_rows", part.bottom_rows},
                      {"frame_cycles", perf::job_cycles(frame, part.bottom_rows)},
                      {"frame_budget_cycles", rc.sched.clock_hz / rc.sched.fps}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

struct RunOverrides {
  std::optional<uint64_t> seed;
  std::optional<std::string> policy;
  std::optional<std::string> out;
  std::optional<int> sweep;
};

sched::Trace dispatch_policy(const cfg::RunConfig& rc, sched::Backend& be,
                             const sched::CostModel& cm, fabric::Partition part,
                             double duration, uint64_t seed) {
  switch (rc.policy) {
    case cfg::Policy::Spatiotemporal:
      return sched::run_spatiotemporal(be, cm, rc.sched, part, duration, seed,
                                       rc.metric_window_s);
    case cfg::Policy::SpatialOnly:
      return sched::run_spatial_only(be, cm, rc.sched, part, duration, seed,
                                     rc.metric_window_s, rc.spatial_window_s);
    case cfg::Policy::FixedWindow:
      return sched::run_fixed_window(be, cm, rc.sched, part, duration, seed,
                                     rc.metric_window_s, rc.fixed_window_s);
  }
  throw Error("bad policy");
}

int cmd_run(const std::string& config_path, const RunOverrides& ov) {
  cfg::RunConfig rc = cfg::load_config_file(config_path);
  if (ov.seed) rc.seed = *ov.seed;
  if (ov.policy) rc.policy = cfg::parse_policy(*ov.policy);
  if (ov.out) rc.out_dir = *ov.out;
  if (ov.sweep) rc.sweep_seeds = *ov.sweep;
  rc.validate();

  stream::Scenario scenario = rc.scenario();
  const double duration = rc.run_duration();
  const auto truth = scenario.boundaries();
  ensure_dir(rc.out_dir);

  std::vector<io::RunSummary> rows;
  for (int i = 0; i < rc.sweep_seeds; ++i) {
    const uint64_t seed = rc.seed + static_cast<uint64_t>(i);
    sched::PretrainSetup setup = sched::pretrain_models(scenario, seed, rc.pretrain_params());
    fabric::Partition part =
        perf::spatial_allocate(rc.student, rc.sched.fps, rc.sched.clock_hz);
    sched::PerfCostModel cost(rc.student, rc.teacher, part, rc.sched);
    sched::SimBackend be(scenario, seed, std::move(setup.student), std::move(setup.teacher),
                         rc.sched);
    sched::Trace tr = dispatch_policy(rc, be, cost, part, duration, seed);

    std::string dir = rc.out_dir;
    if (rc.sweep_seeds > 1) {
      dir += "/seed_" + std::to_string(seed);
      ensure_dir(dir);
    }
    cfg::RunConfig echo = rc;
    echo.seed = seed;
    {
      std::ostringstream ss;
      io::write_phases_csv(ss, tr);
      io::write_text_file(dir + "/phases.csv", ss.str());
    }
    {
      std::ostringstream ss;
      io::write_windows_csv(ss, tr);
      io::write_text_file(dir + "/windows.csv", ss.str());
    }
    io::write_text_file(dir + "/trace.json", io::trace_json(echo, tr));

    io::RunSummary s = io::summarize(seed, cfg::policy_name(rc.policy), tr, truth);
    rows.push_back(s);
    std::printf("seed=%" PRIu64 " policy=%s acc=%.4f drop_rate=%.4f drifts=%d recovery=%.1fs"
                " -> %s\n",
                s.seed, s.policy.c_str(), s.mean_windowed_accuracy, s.drop_rate, s.drift_count,
                s.mean_recovery_s, dir.c_str());
  }

  if (rc.sweep_seeds > 1) {
    std::ostringstream ss;
    io::write_aggregate_csv(ss, rows);
    io::write_text_file(rc.out_dir + "/aggregate.csv", ss.str());
    std::printf("aggregate -> %s/aggregate.csv\n", rc.out_dir.c_str());
  }
  return 0;
}

struct ShapeCase {
  fabric::GemmShape shape;
  int r, c;
  mx::Precision p;
};

int cmd_validate(int samples, int max_dim, uint64_t seed, uint64_t perturb_fill) {
  if (samples < 1) throw ConfigError("validation sweep needs at least one random sample");
  if (max_dim < 1 || max_dim > 256) throw ConfigError("max dim must be in 1..256");

  const std::pair<int, int> grids[] = {{1, 1}, {1, 16}, {16, 1}, {2, 2},
                                       {3, 5}, {4, 4},  {8, 16}, {16, 16}};
  const mx::Precision precs[] = {mx::Precision::MX4, mx::Precision::MX6, mx::Precision::MX9};
  const fabric::GemmShape pinned[] = {{1, 1, 1},   {1, 16, 1},    {16, 16, 16},
                                      {17, 31, 2}, {1, 256, 1},   {256, 1, 256},
                                      {33, 48, 65}, {256, 256, 256}};

  std::vector<fabric::GemmShape> shapes(pinned, pinned + std::size(pinned));
  Rng rng(mix_u64(seed, 0x76616c6964617465ULL));
  for (int i = 0; i < samples; ++i) {
    shapes.push_back({static_cast<int64_t>(rng.next_below(max_dim) + 1),
                      static_cast<int64_t>(rng.next_below(max_dim) + 1),
                      static_cast<int64_t>(rng.next_below(max_dim) + 1)});
  }

  bool bad = false;
  ShapeCase worst{};
  fabric::CycleReport bad_an{}, bad_ev{};
  const int64_t total = static_cast<int64_t>(shapes.size());
#pragma omp parallel for schedule(dynamic)
  for (int64_t i = 0; i < total; ++i) {
    if (bad) continue;
    for (const auto& [r, c] : grids) {
      for (mx::Precision p : precs) {
        fabric::CycleReport an = fabric::gemm_cycles(shapes[i], r, c, p);
        an.fill += perturb_fill;
        an.total += perturb_fill;
        fabric::CycleReport ev = fabric::simulate_gemm(shapes[i], r, c, p);
        if (an.fill != ev.fill || an.compute != ev.compute || an.drain != ev.drain ||
            an.total != ev.total || an.tiles != ev.tiles) {
#pragma omp critical
          {
            if (!bad) {
              bad = true;
              worst = {shapes[i], r, c, p};
              bad_an = an;
              bad_ev = ev;
            }
          }
        }
      }
    }
  }

  if (bad) {
    std::printf("MISMATCH at m=%" PRId64 " k=%" PRId64 " n=%" PRId64 " sa=%dx%d prec=%s\n",
                worst.shape.m, worst.shape.k, worst.shape.n, worst.r, worst.c,
                mx::precision_name(worst.p));
    std::printf("  analytic: fill=%" PRIu64 " compute=%" PRIu64 " drain=%" PRIu64
                " total=%" PRIu64 "\n",
                bad_an.fill, bad_an.compute, bad_an.drain, bad_an.total);
    std::printf("  event:    fill=%" PRIu64 " compute=%" PRIu64 " drain=%" PRIu64
                " total=%" PRIu64 "\n",
                bad_ev.fill, bad_ev.compute, bad_ev.drain, bad_ev.total);
    return 1;
  }
  size_t cases = shapes.size() * std::size(grids) * std::size(precs);
  std::printf("validated %zu gemm cycle cases: closed form == event simulation\n", cases);
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  apply_thread_cap();
  CLI::App app{"block-float continuous-learning accelerator simulator"};
  app.require_subcommand(1);
  int code = 0;

  auto* enc = app.add_subcommand("encode", "quantize an fp32 matrix file into block format");
  std::string enc_in, enc_out, enc_prec = "mx9", enc_major = "row";
  enc->add_option("--in", enc_in, "input matrix (DCM1)")->required();
  enc->add_option("--out", enc_out, "output tensor (MXT1)")->required();
  enc->add_option("--precision", enc_prec, "mx4|mx6|mx9");
  enc->add_option("--major", enc_major, "row|col blocking");
  enc->callback([&] { code = cmd_encode(enc_in, enc_out, enc_prec, enc_major); });

  auto* alloc = app.add_subcommand("allocate", "pick the smallest inference slice for a config");
  std::string alloc_cfg;
  alloc->add_option("--config", alloc_cfg, "run config file")->required();
  alloc->callback([&] { code = cmd_allocate(alloc_cfg); });

  auto* run = app.add_subcommand("run", "simulate a continuous-learning run");
  std::string run_cfg;
  RunOverrides ov;
  uint64_t ov_seed = 0;
  std::string ov_policy, ov_out;
  int ov_sweep = 0;
  run->add_option("--config", run_cfg, "run config file")->required();
  auto* oseed = run->add_option("--seed", ov_seed, "override [run] seed");
  auto* opol = run->add_option("--policy", ov_policy, "override [run] policy");
  auto* oout = run->add_option("--out", ov_out, "override [run] out");
  auto* osweep = run->add_option("--sweep-seeds", ov_sweep, "override [run] sweep_seeds");
  run->callback([&] {
    if (*oseed) ov.seed = ov_seed;
    if (*opol) ov.policy = ov_policy;
    if (*oout) ov.out = ov_out;
    if (*osweep) ov.sweep = ov_sweep;
    code = cmd_run(run_cfg, ov);
  });

  auto* val = app.add_subcommand("validate", "cross-check the cycle model against event sim");
  int val_samples = 2000, val_maxdim = 64;
  uint64_t val_seed = 1, val_perturb = 0;
  val->add_option("--samples", val_samples, "random shapes to draw");
  val->add_option("--max-dim", val_maxdim, "random dim bound (<= 256)");
  val->add_option("--seed", val_seed, "sweep seed");
  val->add_option("--perturb-fill", val_perturb, "self-test: skew the closed form")->group("");
  val->callback([&] { code = cmd_validate(val_samples, val_maxdim, val_seed, val_perturb); });

  auto* pd = app.add_subcommand("print-defaults", "dump the canonical default config");
  pd->callback([&] { std::cout << cfg::serialize_config(cfg::default_config()); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int c = app.exit(e);
    return c == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return code;
}

}  // namespace dacapo::cli
