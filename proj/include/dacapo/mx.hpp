#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dacapo/common.hpp"
#include "dacapo/matrix.hpp"

namespace dacapo::mx {

// Block floating point with a two-level exponent hierarchy: one 8-bit scale
// shared by 16 elements, plus a 1-bit micro-exponent per 2-element sub-block
// that recovers one bit of dynamic range for locally small pairs.
//
// The three precisions differ only in stored mantissa width; sign, shared
// exponent and micro-exponents are laid out identically, which is what lets
// one datapath serve all of them.

inline constexpr int kBlockSize = 16;
inline constexpr int kSubBlockSize = 2;
inline constexpr int kSubBlocks = kBlockSize / kSubBlockSize;
inline constexpr int kExpBias = 127;

enum class Precision : uint8_t { MX4 = 0, MX6 = 1, MX9 = 2 };

constexpr int mantissa_bits(Precision p) {
  switch (p) {
    case Precision::MX4: return 2;
    case Precision::MX6: return 4;
    case Precision::MX9: return 7;
  }
  return 0;
}

// Serial micro-steps one dot-product engine needs per 16-element block.
constexpr int dpe_cycles(Precision p) {
  switch (p) {
    case Precision::MX4: return 1;
    case Precision::MX6: return 4;
    case Precision::MX9: return 16;
  }
  return 0;
}

const char* precision_name(Precision p);
Precision parse_precision(const std::string& s);  // throws ConfigError

struct Block {
  Precision precision = Precision::MX9;
  uint8_t shared_exponent = 0;           // biased, max over live elements
  uint8_t micro_exponents = 0;           // bit i = sub-block i, set => scale/2
  uint16_t signs = 0;                    // bit j = element j, set => negative
  std::array<uint8_t, kBlockSize> mantissas{};  // explicit leading bit

  int micro_exp(int sub) const { return (micro_exponents >> sub) & 1; }
  bool sign(int j) const { return (signs >> j) & 1; }
};

// Encode 16 fp32 values.  Mantissas are truncated toward zero; fp32
// subnormals flush to zero before scale selection.  Throws EncodingError on
// NaN/Inf ("element <j>" in the message).
Block encode_block(std::span<const float, kBlockSize> values, Precision p);

// Exact value of each stored element (mantissa * 2^(E - bias - mu - (m-1)),
// signed).  Elements whose scaled magnitude underflows fp32 decode to 0.
std::array<float, kBlockSize> decode_block(const Block& b);

// Worst-case absolute quantization error for elements of this block:
// one unit in the last stored mantissa place at the block scale.
float quantization_step(const Block& b);

// Dot product of two blocks, computed the way the hardware does: integer
// products aligned by micro-exponent, one fp32 conversion at the very end.
float block_dot(const Block& x, const Block& y);

enum class Major : uint8_t { Row = 0, Col = 1 };

// Blocked tensor.  Row major: each row padded to whole blocks; col major:
// each column padded.  Padding lanes hold zero and never affect dots.
struct Tensor {
  int rows = 0;
  int cols = 0;
  Major major = Major::Row;
  Precision precision = Precision::MX9;
  std::vector<Block> blocks;

  int blocks_per_line() const;
  int lines() const;
  const Block& line_block(int line, int blk) const;
};

Tensor quantize(const Matrix& m, Precision p, Major major);
Tensor quantize_serial(const Matrix& m, Precision p, Major major);
Matrix dequantize(const Tensor& t);

// Container format: magic "MXT1", then precision/dims/major, then packed
// blocks (20 bytes each).
void save_tensor(std::ostream& os, const Tensor& t);
Tensor load_tensor(std::istream& is);
void save_tensor_file(const std::string& path, const Tensor& t);
Tensor load_tensor_file(const std::string& path);

// fp32 matrix container: magic "DCM1", u32 rows, u32 cols, fp32 LE payload.
void save_matrix_file(const std::string& path, const Matrix& m);
Matrix load_matrix_file(const std::string& path);

}  // namespace dacapo::mx
