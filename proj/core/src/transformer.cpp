#include "hashtag/transformer.hpp"

#include <cmath>
#include <stdexcept>

#include "hashtag/rng.hpp"

namespace hashtag::mlm {

namespace {

// Y[t] = W X[t] + b for every row t (b optional). W is [out x in].
void linear_rows(const Tensor& w, const Tensor* b, std::span<const double> x, std::size_t rows,
                 std::span<double> y) {
  const std::size_t in = w.cols();
  const std::size_t out = w.rows();
  for (std::size_t t = 0; t < rows; ++t) {
    auto yr = y.subspan(t * out, out);
    if (b != nullptr) {
      std::copy(b->data().begin(), b->data().end(), yr.begin());
    } else {
      std::fill(yr.begin(), yr.end(), 0.0);
    }
    matvec_acc(w, x.subspan(t * in, in), yr);
  }
}

void linear_rows_backward(const Tensor& w, Tensor& grad_w, Tensor* grad_b, std::span<const double> x,
                          std::span<const double> grad_y, std::size_t rows, std::span<double> grad_x_acc) {
  const std::size_t in = w.cols();
  const std::size_t out = w.rows();
  for (std::size_t t = 0; t < rows; ++t) {
    const auto gy = grad_y.subspan(t * out, out);
    outer_acc(grad_w, gy, x.subspan(t * in, in));
    if (grad_b != nullptr) axpy(1.0, gy, grad_b->data());
    matvec_t_acc(w, gy, grad_x_acc.subspan(t * in, in));
  }
}

void draw_dropout(std::vector<double>& scale, std::size_t n, const DropoutSpec& dropout) {
  if (dropout.rng == nullptr || dropout.rate <= 0.0) {
    scale.clear();
    return;
  }
  scale.resize(n);
  const double keep_scale = 1.0 / (1.0 - dropout.rate);
  for (double& s : scale) s = dropout.rng->uniform() < dropout.rate ? 0.0 : keep_scale;
}

}  // namespace

BlockParams add_block_params(ParameterSet& params, const std::string& prefix, std::size_t hidden,
                             std::size_t ffn_dim) {
  BlockParams b{};
  b.ln1_gamma = params.add(prefix + "ln1.gamma", {hidden});
  b.ln1_beta = params.add(prefix + "ln1.beta", {hidden});
  b.wq = params.add(prefix + "attn.wq", {hidden, hidden});
  b.bq = params.add(prefix + "attn.bq", {hidden});
  b.wk = params.add(prefix + "attn.wk", {hidden, hidden});
  b.wv = params.add(prefix + "attn.wv", {hidden, hidden});
  b.bv = params.add(prefix + "attn.bv", {hidden});
  b.wo = params.add(prefix + "attn.wo", {hidden, hidden});
  b.bo = params.add(prefix + "attn.bo", {hidden});
  b.ln2_gamma = params.add(prefix + "ln2.gamma", {hidden});
  b.ln2_beta = params.add(prefix + "ln2.beta", {hidden});
  b.w1 = params.add(prefix + "ffn.w1", {ffn_dim, hidden});
  b.b1 = params.add(prefix + "ffn.b1", {ffn_dim});
  b.w2 = params.add(prefix + "ffn.w2", {hidden, ffn_dim});
  b.b2 = params.add(prefix + "ffn.b2", {hidden});
  return b;
}

void init_block_params(ParameterSet& params, const BlockParams& block, Rng& rng) {
  params[block.ln1_gamma].value.fill(1.0);
  params[block.ln2_gamma].value.fill(1.0);
  for (std::size_t w : {block.wq, block.wk, block.wv, block.wo, block.w1, block.w2}) {
    init_xavier_uniform(params[w].value, rng);
  }
}

void block_forward(const ParameterSet& params, const BlockParams& block, std::size_t heads,
                   std::span<const double> x, std::size_t rows, std::span<const std::uint8_t> key_keep,
                   BlockCache& cache, std::span<double> y, DropoutSpec dropout) {
  const std::size_t H = params[block.wq].value.rows();
  const std::size_t F = params[block.w1].value.rows();
  if (heads == 0 || H % heads != 0) throw std::invalid_argument("transformer: hidden size not divisible by heads");
  if (x.size() != rows * H || key_keep.size() != rows) throw std::invalid_argument("transformer: shape mismatch");
  const std::size_t dh = H / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  cache.rows = rows;
  cache.x.assign(x.begin(), x.end());
  cache.key_keep.assign(key_keep.begin(), key_keep.end());
  cache.a.assign(rows * H, 0.0);
  layer_norm_forward(x, rows, H, params[block.ln1_gamma].value, params[block.ln1_beta].value, cache.ln1, cache.a);

  cache.q.assign(rows * H, 0.0);
  cache.k.assign(rows * H, 0.0);
  cache.v.assign(rows * H, 0.0);
  linear_rows(params[block.wq].value, &params[block.bq].value, cache.a, rows, cache.q);
  linear_rows(params[block.wk].value, nullptr, cache.a, rows, cache.k);
  linear_rows(params[block.wv].value, &params[block.bv].value, cache.a, rows, cache.v);

  cache.probs.assign(heads * rows * rows, 0.0);
  cache.z.assign(rows * H, 0.0);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    for (std::size_t i = 0; i < rows; ++i) {
      auto p = std::span<double>(cache.probs).subspan((h * rows + i) * rows, rows);
      const double* qi = cache.q.data() + i * H + off;
      for (std::size_t j = 0; j < rows; ++j) {
        if (!key_keep[j]) continue;
        const double* kj = cache.k.data() + j * H + off;
        double s = 0.0;
        for (std::size_t d = 0; d < dh; ++d) s += qi[d] * kj[d];
        p[j] = s * scale;
      }
      masked_softmax_inplace(p, key_keep);
      double* zi = cache.z.data() + i * H + off;
      for (std::size_t j = 0; j < rows; ++j) {
        if (p[j] == 0.0) continue;
        const double* vj = cache.v.data() + j * H + off;
        for (std::size_t d = 0; d < dh; ++d) zi[d] += p[j] * vj[d];
      }
    }
  }

  std::vector<double> attn_out(rows * H);
  linear_rows(params[block.wo].value, &params[block.bo].value, cache.z, rows, attn_out);
  draw_dropout(cache.drop1, rows * H, dropout);
  cache.x1.assign(x.begin(), x.end());
  for (std::size_t e = 0; e < rows * H; ++e) {
    cache.x1[e] += cache.drop1.empty() ? attn_out[e] : attn_out[e] * cache.drop1[e];
  }

  cache.b.assign(rows * H, 0.0);
  layer_norm_forward(cache.x1, rows, H, params[block.ln2_gamma].value, params[block.ln2_beta].value, cache.ln2,
                     cache.b);
  cache.f1.assign(rows * F, 0.0);
  linear_rows(params[block.w1].value, &params[block.b1].value, cache.b, rows, cache.f1);
  cache.g.resize(rows * F);
  for (std::size_t e = 0; e < rows * F; ++e) cache.g[e] = gelu(cache.f1[e]);
  std::vector<double> f2(rows * H);
  linear_rows(params[block.w2].value, &params[block.b2].value, cache.g, rows, f2);
  draw_dropout(cache.drop2, rows * H, dropout);
  for (std::size_t e = 0; e < rows * H; ++e) {
    y[e] = cache.x1[e] + (cache.drop2.empty() ? f2[e] : f2[e] * cache.drop2[e]);
  }
}

void block_backward(ParameterSet& params, const BlockParams& block, std::size_t heads, const BlockCache& cache,
                    std::span<const double> grad_y, std::span<double> grad_x) {
  const std::size_t rows = cache.rows;
  const std::size_t H = params[block.wq].value.rows();
  const std::size_t F = params[block.w1].value.rows();
  const std::size_t dh = H / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // Feed-forward branch.
  std::vector<double> grad_x1(grad_y.begin(), grad_y.end());
  std::vector<double> grad_f2(grad_y.begin(), grad_y.end());
  if (!cache.drop2.empty()) {
    for (std::size_t e = 0; e < grad_f2.size(); ++e) grad_f2[e] *= cache.drop2[e];
  }
  std::vector<double> grad_g(rows * F, 0.0);
  linear_rows_backward(params[block.w2].value, params[block.w2].grad, &params[block.b2].grad, cache.g, grad_f2, rows,
                       grad_g);
  for (std::size_t e = 0; e < rows * F; ++e) grad_g[e] *= gelu_grad(cache.f1[e]);
  std::vector<double> grad_b(rows * H, 0.0);
  linear_rows_backward(params[block.w1].value, params[block.w1].grad, &params[block.b1].grad, cache.b, grad_g, rows,
                       grad_b);
  layer_norm_backward(grad_b, rows, H, params[block.ln2_gamma].value, cache.ln2, params[block.ln2_gamma].grad,
                      params[block.ln2_beta].grad, grad_x1);

  // Attention branch.
  std::vector<double> grad_attn(grad_x1);
  if (!cache.drop1.empty()) {
    for (std::size_t e = 0; e < grad_attn.size(); ++e) grad_attn[e] *= cache.drop1[e];
  }
  std::vector<double> grad_z(rows * H, 0.0);
  linear_rows_backward(params[block.wo].value, params[block.wo].grad, &params[block.bo].grad, cache.z, grad_attn, rows,
                       grad_z);

  std::vector<double> grad_q(rows * H, 0.0), grad_k(rows * H, 0.0), grad_v(rows * H, 0.0);
  std::vector<double> grad_p(rows), grad_s(rows);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    for (std::size_t i = 0; i < rows; ++i) {
      const auto p = std::span<const double>(cache.probs).subspan((h * rows + i) * rows, rows);
      const double* gzi = grad_z.data() + i * H + off;
      for (std::size_t j = 0; j < rows; ++j) {
        grad_p[j] = 0.0;
        if (!cache.key_keep[j]) continue;
        const double* vj = cache.v.data() + j * H + off;
        double* gvj = grad_v.data() + j * H + off;
        double acc = 0.0;
        for (std::size_t d = 0; d < dh; ++d) {
          acc += gzi[d] * vj[d];
          gvj[d] += p[j] * gzi[d];
        }
        grad_p[j] = acc;
      }
      softmax_backward(p, grad_p, grad_s);
      const double* qi = cache.q.data() + i * H + off;
      double* gqi = grad_q.data() + i * H + off;
      for (std::size_t j = 0; j < rows; ++j) {
        if (!cache.key_keep[j] || grad_s[j] == 0.0) continue;
        const double gs = grad_s[j] * scale;
        const double* kj = cache.k.data() + j * H + off;
        double* gkj = grad_k.data() + j * H + off;
        for (std::size_t d = 0; d < dh; ++d) {
          gqi[d] += gs * kj[d];
          gkj[d] += gs * qi[d];
        }
      }
    }
  }

  std::vector<double> grad_a(rows * H, 0.0);
  linear_rows_backward(params[block.wq].value, params[block.wq].grad, &params[block.bq].grad, cache.a, grad_q, rows,
                       grad_a);
  linear_rows_backward(params[block.wk].value, params[block.wk].grad, nullptr, cache.a, grad_k, rows,
                       grad_a);
  linear_rows_backward(params[block.wv].value, params[block.wv].grad, &params[block.bv].grad, cache.a, grad_v, rows,
                       grad_a);

  std::copy(grad_x1.begin(), grad_x1.end(), grad_x.begin());
  layer_norm_backward(grad_a, rows, H, params[block.ln1_gamma].value, cache.ln1, params[block.ln1_gamma].grad,
                      params[block.ln1_beta].grad, grad_x);
}

}  // namespace hashtag::mlm
