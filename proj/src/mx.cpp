#include "dacapo/mx.hpp"

#include <omp.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace dacapo::mx {

const char* precision_name(Precision p) {
  switch (p) {
    case Precision::MX4: return "mx4";
    case Precision::MX6: return "mx6";
    case Precision::MX9: return "mx9";
  }
  return "?";
}

Precision parse_precision(const std::string& s) {
  if (s == "mx4" || s == "MX4") return Precision::MX4;
  if (s == "mx6" || s == "MX6") return Precision::MX6;
  if (s == "mx9" || s == "MX9") return Precision::MX9;
  throw ConfigError("unknown precision '" + s + "' (expected mx4/mx6/mx9)");
}

namespace {

struct Decomposed {
  uint32_t exp = 0;    // raw biased fp32 exponent, 0 for zero/flushed
  uint32_t sig = 0;    // 24-bit significand with explicit leading 1, 0 if zero
  bool neg = false;
};

Decomposed decompose(float v, int idx) {
  uint32_t bits = std::bit_cast<uint32_t>(v);
  uint32_t exp = (bits >> 23) & 0xff;
  uint32_t frac = bits & 0x7fffff;
  if (exp == 0xff) {
    throw EncodingError("cannot encode non-finite value at element " + std::to_string(idx));
  }
  Decomposed d;
  d.neg = (bits >> 31) != 0;
  if (exp == 0) return d;  // zero or subnormal: flush
  d.exp = exp;
  d.sig = (1u << 23) | frac;
  return d;
}

}  // namespace

Block encode_block(std::span<const float, kBlockSize> values, Precision p) {
  std::array<Decomposed, kBlockSize> d;
  for (int j = 0; j < kBlockSize; ++j) d[j] = decompose(values[j], j);

  Block b;
  b.precision = p;
  uint32_t shared = 0;
  for (const auto& e : d) shared = std::max(shared, e.exp);
  b.shared_exponent = static_cast<uint8_t>(shared);

  for (int i = 0; i < kSubBlocks; ++i) {
    uint32_t local = std::max(d[2 * i].exp, d[2 * i + 1].exp);
    if (local < shared) b.micro_exponents |= static_cast<uint8_t>(1u << i);
  }

  const int m = mantissa_bits(p);
  for (int j = 0; j < kBlockSize; ++j) {
    if (d[j].neg) b.signs |= static_cast<uint16_t>(1u << j);
    if (d[j].sig == 0) continue;
    int mu = b.micro_exp(j / kSubBlockSize);
    // Align to the (possibly micro-adjusted) block scale, then truncate to m
    // bits.  shift >= 24-m > 0 always, so the result fits in m bits.
    int shift = (24 - m) + static_cast<int>(shared - d[j].exp) - mu;
    b.mantissas[j] = shift >= 24 ? 0 : static_cast<uint8_t>(d[j].sig >> shift);
  }
  return b;
}

std::array<float, kBlockSize> decode_block(const Block& b) {
  const int m = mantissa_bits(b.precision);
  std::array<float, kBlockSize> out{};
  for (int j = 0; j < kBlockSize; ++j) {
    int mu = b.micro_exp(j / kSubBlockSize);
    // Smallest possible scale is 2^(0-127-1-(m-1)) >= 2^-134, comfortably
    // inside fp32 subnormal range, so this is always exact.
    int e = static_cast<int>(b.shared_exponent) - kExpBias - mu - (m - 1);
    float v = b.mantissas[j] == 0 ? 0.0f : std::ldexp(static_cast<float>(b.mantissas[j]), e);
    out[j] = b.sign(j) ? -v : v;
  }
  return out;
}

float quantization_step(const Block& b) {
  const int m = mantissa_bits(b.precision);
  int e = static_cast<int>(b.shared_exponent) - kExpBias - (m - 1);
  return static_cast<float>(std::ldexp(1.0, e));
}

float block_dot(const Block& x, const Block& y) {
  if (x.precision != y.precision) throw Error("block_dot precision mismatch");
  const int m = mantissa_bits(x.precision);
  int64_t acc = 0;
  for (int j = 0; j < kBlockSize; ++j) {
    int sub = j / kSubBlockSize;
    uint32_t prod = static_cast<uint32_t>(x.mantissas[j]) * y.mantissas[j];
    // Micro-exponents shift by at most 1 each; pre-scaling by 4 keeps the
    // accumulation integral with no rounding before the final conversion.
    int up = 2 - x.micro_exp(sub) - y.micro_exp(sub);
    int64_t term = static_cast<int64_t>(prod) << up;
    acc += (x.sign(j) != y.sign(j)) ? -term : term;
  }
  int base = static_cast<int>(x.shared_exponent) + static_cast<int>(y.shared_exponent) -
             2 * kExpBias - 2 * (m - 1) - 2;
  return static_cast<float>(std::ldexp(static_cast<double>(acc), base));
}

int Tensor::blocks_per_line() const {
  int line_len = (major == Major::Row) ? cols : rows;
  return static_cast<int>(ceil_div(line_len, kBlockSize));
}

int Tensor::lines() const { return (major == Major::Row) ? rows : cols; }

const Block& Tensor::line_block(int line, int blk) const {
  return blocks[static_cast<size_t>(line) * blocks_per_line() + blk];
}

namespace {

Tensor quantize_impl(const Matrix& mat, Precision p, Major major, bool parallel) {
  Tensor t;
  t.rows = mat.rows;
  t.cols = mat.cols;
  t.major = major;
  t.precision = p;
  const int lines = t.lines();
  const int per_line = t.blocks_per_line();
  const int line_len = (major == Major::Row) ? mat.cols : mat.rows;
  t.blocks.resize(static_cast<size_t>(lines) * per_line);

  int bad_line = -1, bad_off = -1;
  const int64_t total = static_cast<int64_t>(lines) * per_line;
#pragma omp parallel for schedule(static) if (parallel)
  for (int64_t idx = 0; idx < total; ++idx) {
    int line = static_cast<int>(idx / per_line);
    int blk = static_cast<int>(idx % per_line);
    std::array<float, kBlockSize> vals{};
    bool ok = true;
    for (int k = 0; k < kBlockSize; ++k) {
      int off = blk * kBlockSize + k;
      if (off >= line_len) break;
      float v = (major == Major::Row) ? mat.at(line, off) : mat.at(off, line);
      if (!std::isfinite(v)) {
#pragma omp critical
        {
          if (bad_line < 0) {
            bad_line = line;
            bad_off = off;
          }
        }
        ok = false;
        break;
      }
      vals[k] = v;
    }
    if (ok) t.blocks[idx] = encode_block(vals, p);
  }
  if (bad_line >= 0) {
    int r = (major == Major::Row) ? bad_line : bad_off;
    int c = (major == Major::Row) ? bad_off : bad_line;
    throw EncodingError("non-finite value at (" + std::to_string(r) + "," + std::to_string(c) + ")");
  }
  return t;
}

}  // namespace

Tensor quantize(const Matrix& m, Precision p, Major major) {
  return quantize_impl(m, p, major, true);
}

Tensor quantize_serial(const Matrix& m, Precision p, Major major) {
  return quantize_impl(m, p, major, false);
}

Matrix dequantize(const Tensor& t) {
  Matrix m(t.rows, t.cols);
  const int per_line = t.blocks_per_line();
  const int line_len = (t.major == Major::Row) ? t.cols : t.rows;
  for (int line = 0; line < t.lines(); ++line) {
    for (int blk = 0; blk < per_line; ++blk) {
      auto vals = decode_block(t.line_block(line, blk));
      for (int k = 0; k < kBlockSize; ++k) {
        int off = blk * kBlockSize + k;
        if (off >= line_len) break;
        if (t.major == Major::Row) {
          m.at(line, off) = vals[k];
        } else {
          m.at(off, line) = vals[k];
        }
      }
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Serialization.

namespace {

constexpr char kTensorMagic[4] = {'M', 'X', 'T', '1'};
constexpr char kMatrixMagic[4] = {'D', 'C', 'M', '1'};

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw ParseError("truncated stream");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_tensor(std::ostream& os, const Tensor& t) {
  os.write(kTensorMagic, 4);
  os.put(static_cast<char>(t.precision));
  os.put(static_cast<char>(t.major));
  put_u32(os, static_cast<uint32_t>(t.rows));
  put_u32(os, static_cast<uint32_t>(t.cols));
  for (const Block& b : t.blocks) {
    os.put(static_cast<char>(b.shared_exponent));
    os.put(static_cast<char>(b.micro_exponents));
    os.put(static_cast<char>(b.signs & 0xff));
    os.put(static_cast<char>(b.signs >> 8));
    os.write(reinterpret_cast<const char*>(b.mantissas.data()), kBlockSize);
  }
  if (!os) throw ParseError("tensor write failed");
}

Tensor load_tensor(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kTensorMagic, 4) != 0) {
    throw ParseError("bad tensor magic (want MXT1)");
  }
  int prec = is.get();
  int major = is.get();
  if (prec < 0 || prec > 2) throw ParseError("bad precision tag " + std::to_string(prec));
  if (major < 0 || major > 1) throw ParseError("bad major tag " + std::to_string(major));
  Tensor t;
  t.precision = static_cast<Precision>(prec);
  t.major = static_cast<Major>(major);
  t.rows = static_cast<int>(get_u32(is));
  t.cols = static_cast<int>(get_u32(is));
  if (t.rows < 0 || t.cols < 0 || static_cast<int64_t>(t.rows) * t.cols > (1ll << 32)) {
    throw ParseError("unreasonable tensor dims");
  }
  size_t n = static_cast<size_t>(t.lines()) * t.blocks_per_line();
  t.blocks.resize(n);
  const int m = mantissa_bits(t.precision);
  for (Block& b : t.blocks) {
    unsigned char hdr[4];
    if (!is.read(reinterpret_cast<char*>(hdr), 4)) throw ParseError("truncated block header");
    b.precision = t.precision;
    b.shared_exponent = hdr[0];
    b.micro_exponents = hdr[1];
    b.signs = static_cast<uint16_t>(hdr[2] | (hdr[3] << 8));
    if (!is.read(reinterpret_cast<char*>(b.mantissas.data()), kBlockSize)) {
      throw ParseError("truncated block payload");
    }
    for (uint8_t mm : b.mantissas) {
      if (mm >> m) throw ParseError("mantissa wider than precision allows");
    }
  }
  is.peek();
  if (!is.eof()) throw ParseError("trailing bytes after tensor payload");
  return t;
}

void save_tensor_file(const std::string& path, const Tensor& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path + " for writing");
  save_tensor(f, t);
}

Tensor load_tensor_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path);
  return load_tensor(f);
}

void save_matrix_file(const std::string& path, const Matrix& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path + " for writing");
  f.write(kMatrixMagic, 4);
  put_u32(f, static_cast<uint32_t>(m.rows));
  put_u32(f, static_cast<uint32_t>(m.cols));
  static_assert(std::endian::native == std::endian::little);
  f.write(reinterpret_cast<const char*>(m.data.data()),
          static_cast<std::streamsize>(m.data.size() * sizeof(float)));
  if (!f) throw ParseError("matrix write failed");
}

Matrix load_matrix_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path);
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, kMatrixMagic, 4) != 0) {
    throw ParseError("bad matrix magic (want DCM1)");
  }
  int rows = static_cast<int>(get_u32(f));
  int cols = static_cast<int>(get_u32(f));
  if (rows < 0 || cols < 0 || static_cast<int64_t>(rows) * cols > (1ll << 31)) {
    throw ParseError("unreasonable matrix dims");
  }
  Matrix m(rows, cols);
  if (!f.read(reinterpret_cast<char*>(m.data.data()),
              static_cast<std::streamsize>(m.data.size() * sizeof(float)))) {
    throw ParseError("truncated matrix payload");
  }
  f.peek();
  if (!f.eof()) throw ParseError("trailing bytes after matrix payload");
  return m;
}

}  // namespace dacapo::mx
