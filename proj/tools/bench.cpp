// Serial-vs-OpenMP timing for the two hot kernels (block quantization and
// the blocked matmul), plus a cross-check that the parallel path is
// bit-identical to the reference.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstring>

#include "dacapo/kernels.hpp"
#include "dacapo/rng.hpp"

using namespace dacapo;

namespace {

Matrix random_matrix(int r, int c, Rng& rng) {
  Matrix m(r, c);
  for (float& v : m.data) v = static_cast<float>(rng.next_gauss());
  return m;
}

template <typename F>
double time_best_of(int reps, F&& f) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

bool same_bits(const Matrix& a, const Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

bool same_blocks(const mx::Tensor& a, const mx::Tensor& b) {
  if (a.blocks.size() != b.blocks.size()) return false;
  for (size_t i = 0; i < a.blocks.size(); ++i) {
    const auto& x = a.blocks[i];
    const auto& y = b.blocks[i];
    if (x.shared_exponent != y.shared_exponent || x.micro_exponents != y.micro_exponents ||
        x.signs != y.signs || x.mantissas != y.mantissas) {
      return false;
    }
  }
  return true;
}

}  // namespace

int main() {
  apply_thread_cap();
  std::printf("threads: %d\n\n", omp_get_max_threads());
  Rng rng(42);

  std::printf("%-28s %10s %10s %8s  %s\n", "kernel", "serial_ms", "omp_ms", "speedup",
              "bit-identical");

  {
    Matrix m = random_matrix(1024, 1024, rng);
    mx::Tensor ts, tp;
    double s = time_best_of(3, [&] { ts = mx::quantize_serial(m, mx::Precision::MX9, mx::Major::Row); });
    double p = time_best_of(3, [&] { tp = mx::quantize(m, mx::Precision::MX9, mx::Major::Row); });
    std::printf("%-28s %10.2f %10.2f %7.2fx  %s\n", "quantize 1024x1024 mx9", s * 1e3, p * 1e3,
                s / p, same_blocks(ts, tp) ? "yes" : "NO");
  }

  for (mx::Precision prec : {mx::Precision::MX4, mx::Precision::MX6, mx::Precision::MX9}) {
    Matrix a = random_matrix(256, 512, rng);
    Matrix b = random_matrix(512, 256, rng);
    Matrix cs, cp;
    double s = time_best_of(3, [&] { cs = mx_matmul_serial(a, b, prec); });
    double p = time_best_of(3, [&] { cp = mx_matmul(a, b, prec); });
    char name[64];
    std::snprintf(name, sizeof(name), "matmul 256x512x256 %s", mx::precision_name(prec));
    std::printf("%-28s %10.2f %10.2f %7.2fx  %s\n", name, s * 1e3, p * 1e3, s / p,
                same_bits(cs, cp) ? "yes" : "NO");
  }
  return 0;
}
