#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "hashtag/tensor.hpp"

namespace hashtag {

/// In-place numerically stable softmax.
void softmax_inplace(std::span<double> values);

/// Softmax restricted to positions where `keep` is true; masked entries get
/// exactly zero. Throws std::invalid_argument if every position is masked.
void masked_softmax_inplace(std::span<double> values, std::span<const std::uint8_t> keep);

// Backward of y = softmax(x) given y and dL/dy; writes dL/dx (masked entries
// of y are zero so they receive zero gradient automatically).
void softmax_backward(std::span<const double> probs, std::span<const double> grad_probs,
                      std::span<double> grad_logits);

struct CrossEntropyResult {
  double loss = 0.0;
  std::vector<double> grad_logits;
};

/// Sparse categorical cross entropy on a single logit vector.
/// loss = -log softmax(logits)[target]; grad = softmax(logits) - onehot(target).
CrossEntropyResult softmax_cross_entropy(std::span<const double> logits, std::size_t target_id);

std::size_t argmax(std::span<const double> values);

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// ---------------------------------------------------------------------------
// LSTM cell. Gate rows are stacked in the order input, forget, candidate,
// output inside the [4H x D] input and [4H x H] recurrent weights.
//
//   i = sigmoid(Wx_i x + Wh_i h + b_i)      f = sigmoid(...)
//   g = tanh(Wx_g x + Wh_g h + b_g)         o = sigmoid(...)
//   c = f * c_prev + i * g                  h = o * tanh(c)

struct LstmWeights {
  const Tensor& wx;
  const Tensor& wh;
  const Tensor& b;
  std::size_t hidden() const { return wh.cols(); }
  std::size_t input() const { return wx.cols(); }
};

struct LstmGrads {
  Tensor& wx;
  Tensor& wh;
  Tensor& b;
};

struct LstmStepCache {
  std::vector<double> x, h_prev, c_prev;
  std::vector<double> i, f, g, o, c, tanh_c;
};

void lstm_forward(const LstmWeights& w, std::span<const double> x, std::span<const double> h_prev,
                  std::span<const double> c_prev, LstmStepCache& cache, std::span<double> h_out,
                  std::span<double> c_out);

// Accumulates weight gradients into `grads` and writes (overwrites) the
// gradients with respect to x, h_prev and c_prev.
void lstm_backward(const LstmWeights& w, LstmGrads grads, const LstmStepCache& cache,
                   std::span<const double> grad_h, std::span<const double> grad_c,
                   std::span<double> grad_x, std::span<double> grad_h_prev,
                   std::span<double> grad_c_prev);

/// Convenience single step returning (h, c).
std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                                    const LstmWeights& w);

// ---------------------------------------------------------------------------
// Row-wise layer normalization: y = gamma * (x - mean) / sqrt(var + eps) + beta

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormCache {
  std::vector<double> normalized;  // x_hat, one row per input row
  std::vector<double> inv_std;     // one per row
};

void layer_norm_forward(std::span<const double> x, std::size_t rows, std::size_t width,
                        const Tensor& gamma, const Tensor& beta, LayerNormCache& cache,
                        std::span<double> y);

void layer_norm_backward(std::span<const double> grad_y, std::size_t rows, std::size_t width,
                         const Tensor& gamma, const LayerNormCache& cache, Tensor& grad_gamma,
                         Tensor& grad_beta, std::span<double> grad_x_acc);

// Exact (erf) GELU and its derivative.
double gelu(double x);
double gelu_grad(double x);

}  // namespace hashtag
