#include "dacapo/kernels.hpp"

#include <omp.h>

#include <cstdlib>

namespace dacapo {

void apply_thread_cap() {
  if (const char* env = std::getenv("DACAPO_SIM_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
}

namespace {

int line_len(const mx::Tensor& t) {
  return t.major == mx::Major::Row ? t.cols : t.rows;
}

Matrix product_impl(const mx::Tensor& a, const mx::Tensor& b, bool parallel) {
  if (line_len(a) != line_len(b)) throw Error("mx_product: inner dims mismatch");
  if (a.precision != b.precision) throw Error("mx_product: precision mismatch");
  const int la = a.lines(), lb = b.lines();
  const int bpl = a.blocks_per_line();
  Matrix out(la, lb);
#pragma omp parallel for schedule(static) if (parallel)
  for (int i = 0; i < la; ++i) {
    for (int j = 0; j < lb; ++j) {
      float acc = 0.0f;
      for (int k = 0; k < bpl; ++k) {
        acc += mx::block_dot(a.line_block(i, k), b.line_block(j, k));
      }
      out.at(i, j) = acc;
    }
  }
  return out;
}

}  // namespace

Matrix mx_product(const mx::Tensor& a, const mx::Tensor& b) { return product_impl(a, b, true); }
Matrix mx_product_serial(const mx::Tensor& a, const mx::Tensor& b) {
  return product_impl(a, b, false);
}

Matrix mx_matmul(const Matrix& a, const Matrix& b, mx::Precision p) {
  return mx_product(mx::quantize(a, p, mx::Major::Row), mx::quantize(b, p, mx::Major::Col));
}

Matrix mx_matmul_serial(const Matrix& a, const Matrix& b, mx::Precision p) {
  return mx_product_serial(mx::quantize_serial(a, p, mx::Major::Row),
                           mx::quantize_serial(b, p, mx::Major::Col));
}

Matrix mx_matmul_nt(const Matrix& a, const Matrix& b, mx::Precision p) {
  return mx_product(mx::quantize(a, p, mx::Major::Row), mx::quantize(b, p, mx::Major::Row));
}

Matrix mx_matmul_tn(const Matrix& a, const Matrix& b, mx::Precision p) {
  return mx_product(mx::quantize(a, p, mx::Major::Col), mx::quantize(b, p, mx::Major::Col));
}

Matrix matmul_fp32(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw Error("matmul_fp32: inner dims mismatch");
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.cols; ++j) {
      float acc = 0.0f;
      for (int k = 0; k < a.cols; ++k) acc += a.at(i, k) * b.at(k, j);
      out.at(i, j) = acc;
    }
  }
  return out;
}

Matrix matmul_fp32_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw Error("matmul_fp32_nt: inner dims mismatch");
  Matrix out(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.rows; ++j) {
      float acc = 0.0f;
      for (int k = 0; k < a.cols; ++k) acc += a.at(i, k) * b.at(j, k);
      out.at(i, j) = acc;
    }
  }
  return out;
}

Matrix matmul_fp32_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) throw Error("matmul_fp32_tn: inner dims mismatch");
  Matrix out(a.cols, b.cols);
  for (int i = 0; i < a.cols; ++i) {
    for (int j = 0; j < b.cols; ++j) {
      float acc = 0.0f;
      for (int k = 0; k < a.rows; ++k) acc += a.at(k, i) * b.at(k, j);
      out.at(i, j) = acc;
    }
  }
  return out;
}

}  // namespace dacapo
