#pragma once

#include <cstdint>
#include <span>

#include "dacapo/mx.hpp"

namespace dacapo::dpe {

// One dot-product engine: a fixed pool of sixteen 2-bit multipliers that is
// re-composed per precision.  Wider mantissas are split into 2-bit limbs and
// multiplied pairwise, so a cycle covers 16 / limbs^2 element products:
//
//   mx4: 16 elements/cycle x 1 limb   -> 1 cycle per block
//   mx6:  4 elements/cycle x 2 limbs  -> 4 cycles per block
//   mx9:  1 element/cycle  x 4 limbs  -> 16 cycles per block
//
// The engine accumulates integer partial sums across cycles (result
// forwarding) and converts to fp32 exactly once at the end, which is why its
// output is bit-identical to mx::block_dot.

struct Mode {
  mx::Precision precision;
  int limbs;           // 2-bit limbs per operand mantissa
  int parallel_mults;  // element products issued per cycle
  int serial_steps;    // cycles per 16-element block
};

Mode make_mode(mx::Precision p);

// Limb decomposition of one stored mantissa, little-endian 2-bit digits.
// count must be 1, 2 or 4.
void split_limbs(uint8_t mantissa, int count, uint8_t out[4]);

// Shift-add composition of one element product from its 2-bit limb products.
// Throws Error unless both operands carry 1, 2 or 4 limbs.
uint32_t compose_multiply(std::span<const uint8_t> a_limbs, std::span<const uint8_t> b_limbs);

struct Result {
  float value;
  int cycles;
};

// Runs one block dot through the engine's cycle loop.
Result execute(const mx::Block& x, const mx::Block& y);

}  // namespace dacapo::dpe
