#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <bit>
#include <cmath>

#include "dacapo/dpe.hpp"
#include "dacapo/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace dacapo;
using namespace dacapo::dpe;
using mx::Precision;

TEST_CASE("mode table") {
  Mode m4 = make_mode(Precision::MX4);
  CHECK(m4.limbs == 1);
  CHECK(m4.parallel_mults == 16);
  CHECK(m4.serial_steps == 1);

  Mode m6 = make_mode(Precision::MX6);
  CHECK(m6.limbs == 2);
  CHECK(m6.parallel_mults == 4);
  CHECK(m6.serial_steps == 4);

  Mode m9 = make_mode(Precision::MX9);
  CHECK(m9.limbs == 4);
  CHECK(m9.parallel_mults == 1);
  CHECK(m9.serial_steps == 16);

  for (Mode m : {m4, m6, m9}) {
    // The multiplier pool is fixed: limbs^2 two-bit products per element.
    CHECK(m.parallel_mults * m.limbs * m.limbs == 16);
    CHECK(m.parallel_mults * m.serial_steps == 16);
    CHECK(m.serial_steps == mx::dpe_cycles(m.precision));
  }
}

TEST_CASE("limb split is little-endian base-4") {
  uint8_t out[4];
  split_limbs(0b01, 1, out);
  CHECK(out[0] == 1);

  split_limbs(0b1110, 2, out);
  CHECK(out[0] == 2);
  CHECK(out[1] == 3);

  split_limbs(0b01101100, 4, out);
  CHECK(out[0] == 0);
  CHECK(out[1] == 3);
  CHECK(out[2] == 2);
  CHECK(out[3] == 1);
}

TEST_CASE("compose_multiply equals plain integer multiply") {
  uint8_t a[4], b[4];

  SUBCASE("1 limb, exhaustive") {
    for (uint32_t x = 0; x < 4; ++x) {
      for (uint32_t y = 0; y < 4; ++y) {
        split_limbs(static_cast<uint8_t>(x), 1, a);
        split_limbs(static_cast<uint8_t>(y), 1, b);
        CHECK(compose_multiply({a, 1}, {b, 1}) == x * y);
      }
    }
  }
  SUBCASE("2 limbs, exhaustive") {
    for (uint32_t x = 0; x < 16; ++x) {
      for (uint32_t y = 0; y < 16; ++y) {
        split_limbs(static_cast<uint8_t>(x), 2, a);
        split_limbs(static_cast<uint8_t>(y), 2, b);
        CHECK(compose_multiply({a, 2}, {b, 2}) == x * y);
      }
    }
  }
  SUBCASE("4 limbs, exhaustive over the 7-bit range") {
    for (uint32_t x = 0; x < 128; ++x) {
      for (uint32_t y = 0; y < 128; ++y) {
        split_limbs(static_cast<uint8_t>(x), 4, a);
        split_limbs(static_cast<uint8_t>(y), 4, b);
        CHECK(compose_multiply({a, 4}, {b, 4}) == x * y);
      }
    }
  }
}

TEST_CASE("compose_multiply rejects unsupported limb counts") {
  uint8_t d[4] = {1, 1, 1, 0};
  CHECK_THROWS_AS(compose_multiply({d, 3}, {d, 3}), Error);
  CHECK_THROWS_AS(compose_multiply({d, 2}, {d, 4}), Error);
  CHECK_THROWS_AS(compose_multiply({d, 0}, {d, 0}), Error);
}

TEST_CASE("execute is bit-identical to the reference block dot") {
  Rng rng(0xd9e);
  for (int it = 0; it < 3000; ++it) {
    auto xa = oracle::random_block(rng);
    auto ya = oracle::random_block(rng);
    for (Precision p : {Precision::MX4, Precision::MX6, Precision::MX9}) {
      mx::Block x = mx::encode_block(xa, p);
      mx::Block y = mx::encode_block(ya, p);
      Result r = execute(x, y);
      float want = mx::block_dot(x, y);
      CHECK(std::bit_cast<uint32_t>(r.value) == std::bit_cast<uint32_t>(want));
      CHECK(r.cycles == mx::dpe_cycles(p));
    }
  }
}

TEST_CASE("execute handles degenerate blocks") {
  std::array<float, 16> zeros{};
  std::array<float, 16> mixed{};
  mixed[0] = -3.5f;
  mixed[9] = 100.0f;
  for (Precision p : {Precision::MX4, Precision::MX6, Precision::MX9}) {
    mx::Block z = mx::encode_block(zeros, p);
    mx::Block m = mx::encode_block(mixed, p);
    CHECK(execute(z, z).value == 0.0f);
    CHECK(execute(z, m).value == 0.0f);
    CHECK(execute(m, m).value == mx::block_dot(m, m));
  }
}

TEST_CASE("execute rejects mixed precisions") {
  std::array<float, 16> v{};
  v[0] = 1.0f;
  mx::Block a = mx::encode_block(v, Precision::MX4);
  mx::Block b = mx::encode_block(v, Precision::MX6);
  CHECK_THROWS_AS(execute(a, b), Error);
}

TEST_CASE("sign cancellation stays exact through the limb path") {
  // +v and -v in matching lanes: the integer accumulator must cancel to 0
  // with no fp32 rounding residue.
  Rng rng(0x5c);
  for (int it = 0; it < 200; ++it) {
    std::array<float, 16> x{}, y{};
    for (int j = 0; j < 8; ++j) {
      float v = static_cast<float>(rng.next_gauss());
      float w = static_cast<float>(rng.next_gauss());
      x[2 * j] = v;
      x[2 * j + 1] = v;
      y[2 * j] = w;
      y[2 * j + 1] = -w;
    }
    for (Precision p : {Precision::MX4, Precision::MX6, Precision::MX9}) {
      mx::Block xb = mx::encode_block(x, p);
      mx::Block yb = mx::encode_block(y, p);
      CHECK(execute(xb, yb).value == 0.0f);
    }
  }
}
