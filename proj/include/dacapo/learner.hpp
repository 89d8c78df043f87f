#pragma once

#include <span>
#include <string>
#include <vector>

#include "dacapo/kernels.hpp"
#include "dacapo/matrix.hpp"
#include "dacapo/perf.hpp"
#include "dacapo/rng.hpp"
#include "dacapo/sample.hpp"

namespace dacapo::learn {

// ReLU MLP, no biases.  Master weights stay fp32; every matmul in the MX
// paths quantizes its operands on the way in, mirroring how the datapath
// only ever sees block-float values.  Elementwise glue (softmax, ReLU masks,
// SGD update) stays fp32.
struct Mlp {
  perf::ModelSpec spec;
  std::vector<Matrix> weights;  // layer i: (in_features x out_features)
};

Mlp make_mlp(const perf::ModelSpec& spec, Rng& init);

enum class LabelSource { Teacher, Truth };

Matrix features_of(std::span<const Sample> batch);

Matrix forward_fp32(const Mlp& m, const Matrix& x);
Matrix forward_mx(const Mlp& m, const Matrix& x, mx::Precision p);

// Weight blocks cached for repeated inference with unchanged weights.
struct CachedWeights {
  mx::Precision precision;
  std::vector<mx::Tensor> cols;
};

CachedWeights cache_weights(const Mlp& m, mx::Precision p);
Matrix forward_cached(const CachedWeights& cw, const Matrix& x);

std::vector<int> predict(const Mlp& m, const Matrix& x, mx::Precision p);
std::vector<int> predict_cached(const CachedWeights& cw, const Matrix& x);

// Fraction of samples whose argmax matches the chosen label.  Throws Error
// on an empty set or (for Teacher) unlabeled samples.
double evaluate(const Mlp& m, std::span<const Sample> set, mx::Precision p, LabelSource ls);

// One SGD minibatch (cross entropy, mean reduction).  Returns the loss.
// The MX variant runs every GEMM of both passes through the block-float
// kernels at precision p; the fp32 variant is the exact reference.
double train_step(Mlp& m, std::span<const Sample> batch, float lr, mx::Precision p,
                  LabelSource ls = LabelSource::Teacher);
double train_step_fp32(Mlp& m, std::span<const Sample> batch, float lr,
                       LabelSource ls = LabelSource::Teacher);

// Offline fp32 pretraining on ground-truth labels.
void pretrain(Mlp& m, const SampleSet& data, int steps, float lr, int batch, Rng& rng);

// Checkpoint format: magic "DCW1", u32 layer count, per-layer dims, then
// fp32 LE row-major payloads.
void save_weights_file(const std::string& path, const Mlp& m);
Mlp load_weights_file(const std::string& path);

}  // namespace dacapo::learn
