#include "dacapo/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace dacapo::learn {

namespace {

void relu_inplace(Matrix& z) {
  for (float& v : z.data) v = v > 0.0f ? v : 0.0f;
}

int argmax_row(const Matrix& logits, int row) {
  int best = 0;
  float bv = logits.at(row, 0);
  for (int c = 1; c < logits.cols; ++c) {
    if (logits.at(row, c) > bv) {
      bv = logits.at(row, c);
      best = c;
    }
  }
  return best;
}

int label_of(const Sample& s, LabelSource ls) {
  if (ls == LabelSource::Truth) return s.true_label;
  if (!s.labeled()) throw Error("sample has no teacher label");
  return s.teacher_label;
}

// Row-wise softmax with max subtraction; returns mean cross entropy and
// leaves (P - Y) / batch in `logits`.
double softmax_ce_grad(Matrix& logits, const std::vector<int>& labels) {
  const int b = logits.rows, c = logits.cols;
  double loss = 0;
  for (int i = 0; i < b; ++i) {
    float mx = logits.at(i, 0);
    for (int j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
    float denom = 0;
    for (int j = 0; j < c; ++j) denom += std::exp(logits.at(i, j) - mx);
    float logp = logits.at(i, labels[i]) - mx - std::log(denom);
    loss -= logp;
    for (int j = 0; j < c; ++j) {
      float p = std::exp(logits.at(i, j) - mx) / denom;
      logits.at(i, j) = (p - (j == labels[i] ? 1.0f : 0.0f)) / static_cast<float>(b);
    }
  }
  return loss / b;
}

using MatmulFn = Matrix (*)(const Matrix&, const Matrix&, mx::Precision);

struct Backward {
  MatmulFn mm, mm_nt, mm_tn;
  mx::Precision p;
};

Matrix mm_fp32(const Matrix& a, const Matrix& b, mx::Precision) { return matmul_fp32(a, b); }
Matrix mm_fp32_nt(const Matrix& a, const Matrix& b, mx::Precision) { return matmul_fp32_nt(a, b); }
Matrix mm_fp32_tn(const Matrix& a, const Matrix& b, mx::Precision) { return matmul_fp32_tn(a, b); }

double train_step_impl(Mlp& m, std::span<const Sample> batch, float lr, const Backward& bw,
                       LabelSource ls) {
  if (batch.empty()) throw Error("train_step requires a non-empty batch");
  const int layers = static_cast<int>(m.weights.size());
  Matrix x = features_of(batch);
  std::vector<int> labels(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) labels[i] = label_of(batch[i], ls);

  std::vector<Matrix> inputs(layers);   // X_l seen by layer l
  std::vector<Matrix> preacts(layers);  // Z_l = X_l W_l
  for (int l = 0; l < layers; ++l) {
    inputs[l] = x;
    preacts[l] = bw.mm(x, m.weights[l], bw.p);
    if (l + 1 < layers) {
      x = preacts[l];
      relu_inplace(x);
    }
  }

  Matrix dz = preacts[layers - 1];
  double loss = softmax_ce_grad(dz, labels);

  for (int l = layers - 1; l >= 0; --l) {
    Matrix dw = bw.mm_tn(inputs[l], dz, bw.p);
    if (l > 0) {
      // The input-gradient GEMM for layer 0 exists in the lowering but its
      // value feeds nothing, so it is not computed here.
      Matrix dx = bw.mm_nt(dz, m.weights[l], bw.p);
      for (int i = 0; i < dx.rows; ++i) {
        for (int j = 0; j < dx.cols; ++j) {
          if (preacts[l - 1].at(i, j) <= 0.0f) dx.at(i, j) = 0.0f;
        }
      }
      dz = std::move(dx);
    }
    float* w = m.weights[l].data.data();
    const float* g = dw.data.data();
    for (size_t i = 0; i < dw.data.size(); ++i) w[i] -= lr * g[i];
  }
  return loss;
}

}  // namespace

Mlp make_mlp(const perf::ModelSpec& spec, Rng& init) {
  spec.validate();
  Mlp m;
  m.spec = spec;
  for (const auto& l : spec.layers) {
    Matrix w(l.in_features, l.out_features);
    float scale = std::sqrt(2.0f / static_cast<float>(l.in_features));
    for (float& v : w.data) v = scale * static_cast<float>(init.next_gauss());
    m.weights.push_back(std::move(w));
  }
  return m;
}

Matrix features_of(std::span<const Sample> batch) {
  Matrix x(static_cast<int>(batch.size()), kFeatureDim);
  for (size_t i = 0; i < batch.size(); ++i) {
    std::memcpy(&x.at(static_cast<int>(i), 0), batch[i].features.data(),
                kFeatureDim * sizeof(float));
  }
  return x;
}

Matrix forward_fp32(const Mlp& m, const Matrix& x) {
  Matrix a = x;
  for (size_t l = 0; l < m.weights.size(); ++l) {
    a = matmul_fp32(a, m.weights[l]);
    if (l + 1 < m.weights.size()) relu_inplace(a);
  }
  return a;
}

Matrix forward_mx(const Mlp& m, const Matrix& x, mx::Precision p) {
  Matrix a = x;
  for (size_t l = 0; l < m.weights.size(); ++l) {
    a = mx_matmul(a, m.weights[l], p);
    if (l + 1 < m.weights.size()) relu_inplace(a);
  }
  return a;
}

CachedWeights cache_weights(const Mlp& m, mx::Precision p) {
  CachedWeights cw;
  cw.precision = p;
  for (const Matrix& w : m.weights) cw.cols.push_back(mx::quantize(w, p, mx::Major::Col));
  return cw;
}

Matrix forward_cached(const CachedWeights& cw, const Matrix& x) {
  Matrix a = x;
  for (size_t l = 0; l < cw.cols.size(); ++l) {
    a = mx_product(mx::quantize(a, cw.precision, mx::Major::Row), cw.cols[l]);
    if (l + 1 < cw.cols.size()) relu_inplace(a);
  }
  return a;
}

std::vector<int> predict(const Mlp& m, const Matrix& x, mx::Precision p) {
  Matrix logits = forward_mx(m, x, p);
  std::vector<int> out(logits.rows);
  for (int i = 0; i < logits.rows; ++i) out[i] = argmax_row(logits, i);
  return out;
}

std::vector<int> predict_cached(const CachedWeights& cw, const Matrix& x) {
  Matrix logits = forward_cached(cw, x);
  std::vector<int> out(logits.rows);
  for (int i = 0; i < logits.rows; ++i) out[i] = argmax_row(logits, i);
  return out;
}

double evaluate(const Mlp& m, std::span<const Sample> set, mx::Precision p, LabelSource ls) {
  if (set.empty()) throw Error("evaluate requires a non-empty sample set");
  Matrix logits = forward_mx(m, features_of(set), p);
  int hits = 0;
  for (size_t i = 0; i < set.size(); ++i) {
    if (argmax_row(logits, static_cast<int>(i)) == label_of(set[i], ls)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(set.size());
}

double train_step(Mlp& m, std::span<const Sample> batch, float lr, mx::Precision p,
                  LabelSource ls) {
  return train_step_impl(m, batch, lr, {mx_matmul, mx_matmul_nt, mx_matmul_tn, p}, ls);
}

double train_step_fp32(Mlp& m, std::span<const Sample> batch, float lr, LabelSource ls) {
  return train_step_impl(m, batch, lr, {mm_fp32, mm_fp32_nt, mm_fp32_tn, mx::Precision::MX9}, ls);
}

void pretrain(Mlp& m, const SampleSet& data, int steps, float lr, int batch, Rng& rng) {
  if (data.empty() || steps < 1) return;
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  size_t cursor = order.size();
  SampleSet mini;
  for (int s = 0; s < steps; ++s) {
    mini.clear();
    for (int i = 0; i < batch; ++i) {
      if (cursor == order.size()) {
        for (size_t j = order.size(); j > 1; --j) {
          std::swap(order[j - 1], order[rng.next_below(j)]);
        }
        cursor = 0;
      }
      mini.push_back(data[order[cursor++]]);
    }
    train_step_fp32(m, mini, lr, LabelSource::Truth);
  }
}

void save_weights_file(const std::string& path, const Mlp& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path + " for writing");
  f.write("DCW1", 4);
  auto put_u32 = [&f](uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<const char*>(b), 4);
  };
  put_u32(static_cast<uint32_t>(m.weights.size()));
  for (const Matrix& w : m.weights) {
    put_u32(static_cast<uint32_t>(w.rows));
    put_u32(static_cast<uint32_t>(w.cols));
  }
  for (const Matrix& w : m.weights) {
    f.write(reinterpret_cast<const char*>(w.data.data()),
            static_cast<std::streamsize>(w.data.size() * sizeof(float)));
  }
  if (!f) throw ParseError("weight write failed");
}

Mlp load_weights_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open " + path);
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, "DCW1", 4) != 0) {
    throw ParseError("bad weight magic (want DCW1)");
  }
  auto get_u32 = [&f]() {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4)) throw ParseError("truncated weight header");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
  };
  uint32_t layers = get_u32();
  if (layers == 0 || layers > 64) throw ParseError("unreasonable layer count");
  Mlp m;
  m.spec.name = "loaded";
  for (uint32_t l = 0; l < layers; ++l) {
    int in = static_cast<int>(get_u32());
    int out = static_cast<int>(get_u32());
    if (in < 1 || out < 1 || static_cast<int64_t>(in) * out > (1 << 26)) {
      throw ParseError("unreasonable layer dims");
    }
    m.spec.layers.push_back({in, out});
    m.weights.emplace_back(in, out);
  }
  m.spec.validate();
  for (Matrix& w : m.weights) {
    if (!f.read(reinterpret_cast<char*>(w.data.data()),
                static_cast<std::streamsize>(w.data.size() * sizeof(float)))) {
      throw ParseError("truncated weight payload");
    }
  }
  f.peek();
  if (!f.eof()) throw ParseError("trailing bytes after weights");
  return m;
}

}  // namespace dacapo::learn
