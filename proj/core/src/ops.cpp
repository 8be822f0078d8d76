#include "hashtag/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "hashtag/error.hpp"

namespace hashtag {

void softmax_inplace(std::span<double> values) {
  if (values.empty()) return;
  const double max_value = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (double& v : values) {
    v = std::exp(v - max_value);
    total += v;
  }
  for (double& v : values) v /= total;
}

void masked_softmax_inplace(std::span<double> values, std::span<const std::uint8_t> keep) {
  double max_value = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (keep[j]) {
      max_value = std::max(max_value, values[j]);
      any = true;
    }
  }
  if (!any) throw std::invalid_argument("masked softmax: all positions are masked");
  double total = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (keep[j]) {
      values[j] = std::exp(values[j] - max_value);
      total += values[j];
    } else {
      values[j] = 0.0;
    }
  }
  for (double& v : values) v /= total;
}

void softmax_backward(std::span<const double> probs, std::span<const double> grad_probs,
                      std::span<double> grad_logits) {
  const double inner = dot(probs, grad_probs);
  for (std::size_t j = 0; j < probs.size(); ++j) {
    grad_logits[j] = probs[j] * (grad_probs[j] - inner);
  }
}

CrossEntropyResult softmax_cross_entropy(std::span<const double> logits, std::size_t target_id) {
  if (target_id >= logits.size()) {
    throw std::out_of_range("cross entropy target " + std::to_string(target_id) +
                            " outside logits of size " + std::to_string(logits.size()));
  }
  const double max_value = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double v : logits) total += std::exp(v - max_value);
  const double log_z = max_value + std::log(total);

  CrossEntropyResult result;
  result.loss = log_z - logits[target_id];
  result.grad_logits.resize(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) {
    result.grad_logits[j] = std::exp(logits[j] - log_z);
  }
  result.grad_logits[target_id] -= 1.0;
  if (!std::isfinite(result.loss)) throw NumericError("cross entropy produced a non-finite loss");
  return result;
}

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

void lstm_forward(const LstmWeights& w, std::span<const double> x, std::span<const double> h_prev,
                  std::span<const double> c_prev, LstmStepCache& cache, std::span<double> h_out,
                  std::span<double> c_out) {
  const std::size_t hidden = w.hidden();
  if (x.size() != w.input() || h_prev.size() != hidden || c_prev.size() != hidden ||
      w.wx.rows() != 4 * hidden || w.b.size() != 4 * hidden) {
    throw std::invalid_argument("lstm: shape mismatch");
  }
  std::vector<double> pre(w.b.data().begin(), w.b.data().end());
  matvec_acc(w.wx, x, pre);
  matvec_acc(w.wh, h_prev, pre);

  cache.x.assign(x.begin(), x.end());
  cache.h_prev.assign(h_prev.begin(), h_prev.end());
  cache.c_prev.assign(c_prev.begin(), c_prev.end());
  cache.i.resize(hidden);
  cache.f.resize(hidden);
  cache.g.resize(hidden);
  cache.o.resize(hidden);
  cache.c.resize(hidden);
  cache.tanh_c.resize(hidden);
  for (std::size_t k = 0; k < hidden; ++k) {
    cache.i[k] = sigmoid(pre[k]);
    cache.f[k] = sigmoid(pre[hidden + k]);
    cache.g[k] = std::tanh(pre[2 * hidden + k]);
    cache.o[k] = sigmoid(pre[3 * hidden + k]);
    cache.c[k] = cache.f[k] * c_prev[k] + cache.i[k] * cache.g[k];
    cache.tanh_c[k] = std::tanh(cache.c[k]);
    c_out[k] = cache.c[k];
    h_out[k] = cache.o[k] * cache.tanh_c[k];
  }
}

void lstm_backward(const LstmWeights& w, LstmGrads grads, const LstmStepCache& cache,
                   std::span<const double> grad_h, std::span<const double> grad_c,
                   std::span<double> grad_x, std::span<double> grad_h_prev,
                   std::span<double> grad_c_prev) {
  const std::size_t hidden = w.hidden();
  std::vector<double> dpre(4 * hidden);
  for (std::size_t k = 0; k < hidden; ++k) {
    const double d_o = grad_h[k] * cache.tanh_c[k];
    const double dc = grad_c[k] + grad_h[k] * cache.o[k] * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]);
    const double d_i = dc * cache.g[k];
    const double d_f = dc * cache.c_prev[k];
    const double d_g = dc * cache.i[k];
    grad_c_prev[k] = dc * cache.f[k];
    dpre[k] = d_i * cache.i[k] * (1.0 - cache.i[k]);
    dpre[hidden + k] = d_f * cache.f[k] * (1.0 - cache.f[k]);
    dpre[2 * hidden + k] = d_g * (1.0 - cache.g[k] * cache.g[k]);
    dpre[3 * hidden + k] = d_o * cache.o[k] * (1.0 - cache.o[k]);
  }
  outer_acc(grads.wx, dpre, cache.x);
  outer_acc(grads.wh, dpre, cache.h_prev);
  axpy(1.0, dpre, grads.b.data());

  std::fill(grad_x.begin(), grad_x.end(), 0.0);
  std::fill(grad_h_prev.begin(), grad_h_prev.end(), 0.0);
  matvec_t_acc(w.wx, dpre, grad_x);
  matvec_t_acc(w.wh, dpre, grad_h_prev);
}

std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                                    const LstmWeights& w) {
  const std::size_t hidden = w.hidden();
  Tensor h({hidden});
  Tensor c({hidden});
  LstmStepCache cache;
  lstm_forward(w, x.data(), h_prev.data(), c_prev.data(), cache, h.data(), c.data());
  return {std::move(h), std::move(c)};
}

void layer_norm_forward(std::span<const double> x, std::size_t rows, std::size_t width,
                        const Tensor& gamma, const Tensor& beta, LayerNormCache& cache,
                        std::span<double> y) {
  cache.normalized.resize(rows * width);
  cache.inv_std.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * width;
    double mean = 0.0;
    for (std::size_t c = 0; c < width; ++c) mean += xr[c];
    mean /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t c = 0; c < width; ++c) var += (xr[c] - mean) * (xr[c] - mean);
    var /= static_cast<double>(width);
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std[r] = inv_std;
    for (std::size_t c = 0; c < width; ++c) {
      const double xhat = (xr[c] - mean) * inv_std;
      cache.normalized[r * width + c] = xhat;
      y[r * width + c] = gamma[c] * xhat + beta[c];
    }
  }
}

void layer_norm_backward(std::span<const double> grad_y, std::size_t rows, std::size_t width,
                         const Tensor& gamma, const LayerNormCache& cache, Tensor& grad_gamma,
                         Tensor& grad_beta, std::span<double> grad_x_acc) {
  std::vector<double> dxhat(width);
  const double n = static_cast<double>(width);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* gy = grad_y.data() + r * width;
    const double* xhat = cache.normalized.data() + r * width;
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      grad_gamma[c] += gy[c] * xhat[c];
      grad_beta[c] += gy[c];
      dxhat[c] = gy[c] * gamma[c];
      sum_dxhat += dxhat[c];
      sum_dxhat_xhat += dxhat[c] * xhat[c];
    }
    const double inv_std = cache.inv_std[r];
    for (std::size_t c = 0; c < width; ++c) {
      grad_x_acc[r * width + c] += inv_std / n * (n * dxhat[c] - sum_dxhat - xhat[c] * sum_dxhat_xhat);
    }
  }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
  return cdf + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

}  // namespace hashtag
