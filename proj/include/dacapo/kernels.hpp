#pragma once

#include "dacapo/matrix.hpp"
#include "dacapo/mx.hpp"

namespace dacapo {

// Blocked matmul kernels.  Left operands are quantized along rows, right
// operands along columns, so every output element is a sum of 16-wide block
// dots; accumulation across blocks is fp32 in ascending k order, matching the
// output-stationary accumulator.  The _serial variants are the reference
// implementations the OpenMP ones are checked against (outputs must be
// bit-identical; parallelism is only over independent output rows).

// Core: both tensors hold the dot vectors as lines.  out dims = (a.lines x b.lines).
Matrix mx_product(const mx::Tensor& a, const mx::Tensor& b);
Matrix mx_product_serial(const mx::Tensor& a, const mx::Tensor& b);

// C = A(m,k) * B(k,n)
Matrix mx_matmul(const Matrix& a, const Matrix& b, mx::Precision p);
Matrix mx_matmul_serial(const Matrix& a, const Matrix& b, mx::Precision p);

// C = A(m,k) * B(n,k)^T   (row-by-row dots)
Matrix mx_matmul_nt(const Matrix& a, const Matrix& b, mx::Precision p);

// C = A(m,k)^T * B(m,n)   (column-by-column dots)
Matrix mx_matmul_tn(const Matrix& a, const Matrix& b, mx::Precision p);

// fp32 references, plain triple loops with ascending-k accumulation.
Matrix matmul_fp32(const Matrix& a, const Matrix& b);
Matrix matmul_fp32_nt(const Matrix& a, const Matrix& b);
Matrix matmul_fp32_tn(const Matrix& a, const Matrix& b);

}  // namespace dacapo
