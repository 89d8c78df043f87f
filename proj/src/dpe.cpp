#include "dacapo/dpe.hpp"

#include <cmath>

namespace dacapo::dpe {

Mode make_mode(mx::Precision p) {
  switch (p) {
    case mx::Precision::MX4: return {p, 1, 16, 1};
    case mx::Precision::MX6: return {p, 2, 4, 4};
    case mx::Precision::MX9: return {p, 4, 1, 16};
  }
  throw Error("bad precision");
}

void split_limbs(uint8_t mantissa, int count, uint8_t out[4]) {
  for (int i = 0; i < count; ++i) out[i] = (mantissa >> (2 * i)) & 0x3;
}

uint32_t compose_multiply(std::span<const uint8_t> a_limbs, std::span<const uint8_t> b_limbs) {
  size_t n = a_limbs.size();
  if (n != b_limbs.size() || (n != 1 && n != 2 && n != 4)) {
    throw Error("compose_multiply: operands must carry 1, 2 or 4 limbs");
  }
  uint32_t acc = 0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      uint32_t p = static_cast<uint32_t>(a_limbs[i] & 0x3) * (b_limbs[j] & 0x3);
      acc += p << (2 * (i + j));
    }
  }
  return acc;
}

Result execute(const mx::Block& x, const mx::Block& y) {
  if (x.precision != y.precision) throw Error("dpe: operand precision mismatch");
  Mode mode = make_mode(x.precision);
  const int m = mx::mantissa_bits(x.precision);

  int64_t acc = 0;
  for (int step = 0; step < mode.serial_steps; ++step) {
    // All parallel lanes of this cycle feed the same adder tree; the running
    // sum is forwarded into the next cycle unscaled.
    for (int lane = 0; lane < mode.parallel_mults; ++lane) {
      int j = step * mode.parallel_mults + lane;
      uint8_t la[4], lb[4];
      split_limbs(x.mantissas[j], mode.limbs, la);
      split_limbs(y.mantissas[j], mode.limbs, lb);
      uint32_t prod = compose_multiply({la, static_cast<size_t>(mode.limbs)},
                                       {lb, static_cast<size_t>(mode.limbs)});
      int sub = j / mx::kSubBlockSize;
      int up = 2 - x.micro_exp(sub) - y.micro_exp(sub);
      int64_t term = static_cast<int64_t>(prod) << up;
      acc += (x.sign(j) != y.sign(j)) ? -term : term;
    }
  }

  int base = static_cast<int>(x.shared_exponent) + static_cast<int>(y.shared_exponent) -
             2 * mx::kExpBias - 2 * (m - 1) - 2;
  Result r;
  r.value = static_cast<float>(std::ldexp(static_cast<double>(acc), base));
  r.cycles = mode.serial_steps;
  return r;
}

}  // namespace dacapo::dpe
