#pragma once

#include <cstddef>
#include <vector>

#include "dacapo/common.hpp"

namespace dacapo {

// Dense row-major fp32 matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0f) {
    if (r < 0 || c < 0) throw Error("matrix dims must be non-negative");
  }

  float& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  float at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return data.size(); }
};

}  // namespace dacapo
