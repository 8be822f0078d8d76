#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hashtag/ops.hpp"
#include "hashtag/tensor.hpp"

namespace hashtag {
class Rng;
}

namespace hashtag::mlm {

// Pre-layer-norm transformer encoder block over a [T x H] row-major matrix:
//
//   x1 = x  + Dropout(MHA(LN1(x)))
//   y  = x1 + Dropout(W2 GELU(W1 LN2(x1) + b1) + b2)
//
// Keys whose `key_keep` flag is 0 receive zero attention weight.
struct BlockParams {
  std::size_t ln1_gamma, ln1_beta;
  std::size_t wq, bq, wk, wv, bv, wo, bo;  // no key bias: it cannot change softmax scores
  std::size_t ln2_gamma, ln2_beta;
  std::size_t w1, b1, w2, b2;
};

BlockParams add_block_params(ParameterSet& params, const std::string& prefix, std::size_t hidden,
                             std::size_t ffn_dim);
void init_block_params(ParameterSet& params, const BlockParams& block, Rng& rng);

struct BlockCache {
  std::size_t rows = 0;
  std::vector<double> x;
  LayerNormCache ln1;
  std::vector<double> a, q, k, v;
  std::vector<double> probs;  // [heads x T x T]
  std::vector<double> z;
  std::vector<double> drop1;  // dropout scale per element (empty when dropout is off)
  std::vector<double> x1;
  LayerNormCache ln2;
  std::vector<double> b, f1, g;
  std::vector<double> drop2;
  std::vector<std::uint8_t> key_keep;
};

struct DropoutSpec {
  double rate = 0.0;
  Rng* rng = nullptr;  // no dropout when null or rate == 0
};

void block_forward(const ParameterSet& params, const BlockParams& block, std::size_t heads,
                   std::span<const double> x, std::size_t rows, std::span<const std::uint8_t> key_keep,
                   BlockCache& cache, std::span<double> y, DropoutSpec dropout = {});

/// Accumulates parameter gradients and writes dL/dx (overwriting grad_x).
void block_backward(ParameterSet& params, const BlockParams& block, std::size_t heads, const BlockCache& cache,
                    std::span<const double> grad_y, std::span<double> grad_x);

}  // namespace hashtag::mlm
