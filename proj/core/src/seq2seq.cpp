#include "hashtag/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "hashtag/error.hpp"
#include "hashtag/rng.hpp"

namespace hashtag::seq2seq {

// ---------------------------------------------------------------------------
// Config

Seq2SeqConfig Seq2SeqConfig::paper(std::size_t vocab_size) {
  Seq2SeqConfig c;
  c.vocab_size = vocab_size;
  return c;
}

Seq2SeqConfig Seq2SeqConfig::tiny(std::size_t vocab_size) {
  Seq2SeqConfig c;
  c.vocab_size = vocab_size;
  c.embed_dim = 16;
  c.encoder_layers = 1;
  c.encoder_cells = 16;
  c.decoder_layers = 1;
  c.decoder_cells = 32;
  c.attention_dim = 16;
  return c;
}

void Seq2SeqConfig::validate() const {
  if (vocab_size <= special::kCount || embed_dim == 0 || encoder_layers == 0 || encoder_cells == 0 ||
      decoder_layers == 0 || decoder_cells == 0 || max_source_len == 0 || max_target_len == 0 ||
      attention_dim == 0) {
    throw std::invalid_argument("seq2seq config: every dimension must be positive and vocab_size > 6");
  }
}

nlohmann::json Seq2SeqConfig::to_json() const {
  return {{"vocab_size", vocab_size},         {"embed_dim", embed_dim},
          {"encoder_layers", encoder_layers}, {"encoder_cells", encoder_cells},
          {"decoder_layers", decoder_layers}, {"decoder_cells", decoder_cells},
          {"max_source_len", max_source_len}, {"max_target_len", max_target_len},
          {"attention_dim", attention_dim}};
}

Seq2SeqConfig Seq2SeqConfig::from_json(const nlohmann::json& doc) {
  Seq2SeqConfig c;
  try {
    c.vocab_size = doc.at("vocab_size").get<std::size_t>();
    c.embed_dim = doc.at("embed_dim").get<std::size_t>();
    c.encoder_layers = doc.at("encoder_layers").get<std::size_t>();
    c.encoder_cells = doc.at("encoder_cells").get<std::size_t>();
    c.decoder_layers = doc.at("decoder_layers").get<std::size_t>();
    c.decoder_cells = doc.at("decoder_cells").get<std::size_t>();
    c.max_source_len = doc.at("max_source_len").get<std::size_t>();
    c.max_target_len = doc.at("max_target_len").get<std::size_t>();
    c.attention_dim = doc.at("attention_dim").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad seq2seq config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Attention

std::vector<double> attention_keys(const Tensor& w_key, const Tensor& annotations,
                                   std::span<const std::uint8_t> keep) {
  const std::size_t steps = annotations.rows();
  const std::size_t attn = w_key.rows();
  std::vector<double> keys(steps * attn, 0.0);
  for (std::size_t j = 0; j < steps; ++j) {
    if (!keep[j]) continue;
    matvec_acc(w_key, annotations.row(j), std::span<double>(keys).subspan(j * attn, attn));
  }
  return keys;
}

void attend_forward(const AttentionWeights& w, std::span<const double> state, const Tensor& annotations,
                    std::span<const double> keys, std::span<const std::uint8_t> keep, AttentionCache& cache,
                    std::span<double> context) {
  const std::size_t steps = annotations.rows();
  const std::size_t attn = w.w_query.rows();
  if (state.size() != w.w_query.cols() || annotations.cols() != w.w_key.cols() || keep.size() != steps ||
      context.size() != annotations.cols()) {
    throw std::invalid_argument("attention: shape mismatch");
  }
  std::vector<double> query(attn, 0.0);
  matvec_acc(w.w_query, state, query);

  cache.hidden.assign(steps * attn, 0.0);
  cache.weights.assign(steps, 0.0);
  for (std::size_t j = 0; j < steps; ++j) {
    if (!keep[j]) continue;
    double* hidden = cache.hidden.data() + j * attn;
    const double* key = keys.data() + j * attn;
    double score = 0.0;
    for (std::size_t a = 0; a < attn; ++a) {
      hidden[a] = std::tanh(query[a] + key[a]);
      score += w.v[a] * hidden[a];
    }
    cache.weights[j] = score;
  }
  masked_softmax_inplace(cache.weights, keep);

  std::fill(context.begin(), context.end(), 0.0);
  for (std::size_t j = 0; j < steps; ++j) {
    if (cache.weights[j] != 0.0) axpy(cache.weights[j], annotations.row(j), context);
  }
}

void attend_backward(const AttentionWeights& w, AttentionGrads grads, std::span<const double> state,
                     const Tensor& annotations, std::span<const std::uint8_t> keep, const AttentionCache& cache,
                     std::span<const double> grad_context, std::span<double> grad_state_acc,
                     std::span<double> grad_keys_acc, std::span<double> grad_annotations_acc) {
  const std::size_t steps = annotations.rows();
  const std::size_t attn = w.w_query.rows();
  const std::size_t width = annotations.cols();

  std::vector<double> grad_weights(steps, 0.0);
  for (std::size_t j = 0; j < steps; ++j) {
    if (!keep[j]) continue;
    grad_weights[j] = dot(grad_context, annotations.row(j));
    axpy(cache.weights[j], grad_context, grad_annotations_acc.subspan(j * width, width));
  }
  std::vector<double> grad_scores(steps, 0.0);
  softmax_backward(cache.weights, grad_weights, grad_scores);

  std::vector<double> grad_query(attn, 0.0);
  for (std::size_t j = 0; j < steps; ++j) {
    if (!keep[j]) continue;
    const double* hidden = cache.hidden.data() + j * attn;
    double* grad_key = grad_keys_acc.data() + j * attn;
    const double ds = grad_scores[j];
    for (std::size_t a = 0; a < attn; ++a) {
      grads.v[a] += ds * hidden[a];
      const double pre = ds * w.v[a] * (1.0 - hidden[a] * hidden[a]);
      grad_query[a] += pre;
      grad_key[a] += pre;
    }
  }
  outer_acc(grads.w_query, grad_query, state);
  matvec_t_acc(w.w_query, grad_query, grad_state_acc);
}

void attention_keys_backward(const Tensor& w_key, Tensor& grad_w_key, const Tensor& annotations,
                             std::span<const std::uint8_t> keep, std::span<const double> grad_keys,
                             std::span<double> grad_annotations_acc) {
  const std::size_t attn = w_key.rows();
  const std::size_t width = annotations.cols();
  for (std::size_t j = 0; j < annotations.rows(); ++j) {
    if (!keep[j]) continue;
    const auto gk = grad_keys.subspan(j * attn, attn);
    outer_acc(grad_w_key, gk, annotations.row(j));
    matvec_t_acc(w_key, gk, grad_annotations_acc.subspan(j * width, width));
  }
}

AttentionResult attend(const AttentionWeights& w, std::span<const double> state, const Tensor& annotations,
                       std::span<const std::uint8_t> keep) {
  const auto keys = attention_keys(w.w_key, annotations, keep);
  AttentionCache cache;
  AttentionResult result;
  result.context.assign(annotations.cols(), 0.0);
  attend_forward(w, state, annotations, keys, keep, cache, result.context);
  result.weights = std::move(cache.weights);
  return result;
}

// ---------------------------------------------------------------------------
// Model

namespace {

void init_lstm(ParameterSet& params, const std::array<std::size_t, 3>& idx, Rng& rng) {
  init_xavier_uniform(params[idx[0]].value, rng);
  init_xavier_uniform(params[idx[1]].value, rng);
  auto& bias = params[idx[2]].value;
  bias.fill(0.0);
  const std::size_t hidden = bias.size() / 4;
  for (std::size_t k = hidden; k < 2 * hidden; ++k) bias[k] = 1.0;
}

LstmWeights lstm_weights(const ParameterSet& params, const std::array<std::size_t, 3>& idx) {
  return {params[idx[0]].value, params[idx[1]].value, params[idx[2]].value};
}

LstmGrads lstm_grads(ParameterSet& params, const std::array<std::size_t, 3>& idx) {
  return {params[idx[0]].grad, params[idx[1]].grad, params[idx[2]].grad};
}

std::span<const double> embedding_row(const Tensor& table, TokenId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= table.rows()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  }
  return table.row(static_cast<std::size_t>(id));
}

}  // namespace

bool decodable(TokenId id) {
  return id == special::kEnd || !Vocabulary::is_special(id);
}

std::pair<std::vector<TokenId>, std::vector<TokenId>> teacher_forcing_pairs(std::span<const TokenId> target_ids) {
  std::size_t length = 0;
  while (length < target_ids.size() && target_ids[length] != special::kPad) ++length;
  if (length < 2) return {};
  std::vector<TokenId> inputs(target_ids.begin(), target_ids.begin() + static_cast<std::ptrdiff_t>(length - 1));
  std::vector<TokenId> golds(target_ids.begin() + 1, target_ids.begin() + static_cast<std::ptrdiff_t>(length));
  return {std::move(inputs), std::move(golds)};
}

Seq2SeqModel::Seq2SeqModel(const Seq2SeqConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const std::size_t V = config_.vocab_size;
  const std::size_t E = config_.embed_dim;
  const std::size_t C = config_.encoder_cells;
  const std::size_t D = config_.decoder_cells;
  const std::size_t A = config_.attention_dim;
  const std::size_t ann = config_.annotation_dim();

  src_embedding_ = params_.add("src_embedding", {V, E});
  tgt_embedding_ = params_.add("tgt_embedding", {V, E});
  static constexpr const char* kDir[2] = {"fwd", "bwd"};
  for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
    const std::size_t in = l == 0 ? E : ann;
    std::array<std::array<std::size_t, 3>, 2> layer{};
    for (std::size_t d = 0; d < 2; ++d) {
      const std::string prefix = "encoder.l" + std::to_string(l) + "." + kDir[d] + ".";
      layer[d] = {params_.add(prefix + "wx", {4 * C, in}), params_.add(prefix + "wh", {4 * C, C}),
                  params_.add(prefix + "b", {4 * C})};
    }
    encoder_.push_back(layer);
  }
  for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
    const std::string prefix = "bridge.l" + std::to_string(l) + ".";
    bridge_.push_back({params_.add(prefix + "w", {D, ann}), params_.add(prefix + "b", {D})});
  }
  for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
    const std::size_t in = l == 0 ? E + ann : D;
    const std::string prefix = "decoder.l" + std::to_string(l) + ".";
    decoder_.push_back({params_.add(prefix + "wx", {4 * D, in}), params_.add(prefix + "wh", {4 * D, D}),
                        params_.add(prefix + "b", {4 * D})});
  }
  attn_query_ = params_.add("attention.w_query", {A, D});
  attn_key_ = params_.add("attention.w_key", {A, ann});
  attn_v_ = params_.add("attention.v", {A});
  out_w_ = params_.add("output.w", {V, D + ann});
  out_b_ = params_.add("output.b", {V});

  Rng rng(seed);
  init_xavier_uniform(params_[src_embedding_].value, rng);
  init_xavier_uniform(params_[tgt_embedding_].value, rng);
  for (const auto& layer : encoder_) {
    for (const auto& dir : layer) init_lstm(params_, dir, rng);
  }
  for (const auto& b : bridge_) init_xavier_uniform(params_[b[0]].value, rng);
  for (const auto& layer : decoder_) init_lstm(params_, layer, rng);
  init_xavier_uniform(params_[attn_query_].value, rng);
  init_xavier_uniform(params_[attn_key_].value, rng);
  init_uniform(params_[attn_v_].value, std::sqrt(6.0 / static_cast<double>(A + 1)), rng);
  init_xavier_uniform(params_[out_w_].value, rng);
}

// Everything the backward pass needs from one teacher-forced forward pass.
struct Seq2SeqModel::ForwardCache {
  std::vector<TokenId> source;
  std::vector<std::size_t> positions;  // source indices of non-PAD tokens
  // [layer][dir][step]
  std::vector<std::array<std::vector<LstmStepCache>, 2>> encoder_steps;
  EncoderOutput encoded;
  std::vector<double> keys;
  std::vector<std::vector<double>> initial_h;  // per decoder layer, after tanh

  struct Step {
    TokenId input = special::kPad;
    std::vector<double> state;  // attention query state (previous top h)
    AttentionCache attention;
    std::vector<double> context;
    std::vector<LstmStepCache> cells;
    std::vector<double> projection_input;
    std::vector<double> grad_logits;
  };
  std::vector<Step> steps;
};

EncoderOutput Seq2SeqModel::encode(std::span<const TokenId> source_ids) const {
  return run_encoder(source_ids, nullptr);
}

EncoderOutput Seq2SeqModel::run_encoder(std::span<const TokenId> source_ids, ForwardCache* fc) const {
  const std::size_t C = config_.encoder_cells;
  const std::size_t ann = config_.annotation_dim();
  if (source_ids.size() > config_.max_source_len) {
    throw std::invalid_argument("source longer than max_source_len");
  }
  std::vector<std::size_t> positions;
  for (std::size_t j = 0; j < source_ids.size(); ++j) {
    if (source_ids[j] != special::kPad) positions.push_back(j);
  }
  const std::size_t n = positions.size();
  if (n == 0) throw std::invalid_argument("seq2seq: source has no tokens");

  std::vector<std::vector<double>> inputs(n);
  for (std::size_t t = 0; t < n; ++t) {
    auto row = embedding_row(params_[src_embedding_].value, source_ids[positions[t]]);
    inputs[t].assign(row.begin(), row.end());
  }
  if (fc) fc->encoder_steps.assign(config_.encoder_layers, {});
  std::vector<std::vector<double>> fwd(n, std::vector<double>(C)), bwd(n, std::vector<double>(C));
  LstmStepCache scratch;
  std::vector<double> h(C), c(C), c_next(C);
  for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
    for (std::size_t d = 0; d < 2; ++d) {
      const auto w = lstm_weights(params_, encoder_[l][d]);
      if (fc) fc->encoder_steps[l][d].assign(n, {});
      std::fill(h.begin(), h.end(), 0.0);
      std::fill(c.begin(), c.end(), 0.0);
      auto& outputs = d == 0 ? fwd : bwd;
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t t = d == 0 ? k : n - 1 - k;
        LstmStepCache& cache = fc ? fc->encoder_steps[l][d][t] : scratch;
        lstm_forward(w, inputs[t], h, c, cache, outputs[t], c_next);
        h = outputs[t];
        c = c_next;
      }
    }
    for (std::size_t t = 0; t < n; ++t) {
      inputs[t].assign(fwd[t].begin(), fwd[t].end());
      inputs[t].insert(inputs[t].end(), bwd[t].begin(), bwd[t].end());
    }
  }

  EncoderOutput out;
  out.annotations = Tensor({source_ids.size(), ann});
  out.keep.assign(source_ids.size(), 0);
  for (std::size_t t = 0; t < n; ++t) {
    auto row = out.annotations.row(positions[t]);
    std::copy(inputs[t].begin(), inputs[t].end(), row.begin());
    out.keep[positions[t]] = 1;
  }
  out.summary.assign(fwd[n - 1].begin(), fwd[n - 1].end());
  out.summary.insert(out.summary.end(), bwd[0].begin(), bwd[0].end());
  if (fc) {
    fc->source.assign(source_ids.begin(), source_ids.end());
    fc->positions = std::move(positions);
  }
  return out;
}

// Decoder hidden states start at tanh(W summary + b) per layer; cells start at zero.
std::vector<std::vector<double>> Seq2SeqModel::initial_states(std::span<const double> summary) const {
  std::vector<std::vector<double>> states;
  for (const auto& [w, b] : bridge_) {
    const auto bias = params_[b].value.data();
    std::vector<double> h0(bias.begin(), bias.end());
    matvec_acc(params_[w].value, summary, h0);
    for (double& v : h0) v = std::tanh(v);
    states.push_back(std::move(h0));
  }
  return states;
}

TokenTally Seq2SeqModel::forward(const corpus::Seq2SeqExample& example, ForwardCache* cache) const {
  const std::size_t D = config_.decoder_cells;
  const std::size_t ann = config_.annotation_dim();
  const std::size_t V = config_.vocab_size;
  const std::size_t layers = config_.decoder_layers;

  ForwardCache local;
  ForwardCache& fc = cache ? *cache : local;
  fc.encoded = run_encoder(example.source_ids, &fc);
  const auto& enc = fc.encoded;
  const Mask& keep = enc.keep;
  fc.keys = attention_keys(params_[attn_key_].value, enc.annotations, keep);
  const AttentionWeights aw{params_[attn_query_].value, params_[attn_key_].value, params_[attn_v_].value};

  fc.initial_h = initial_states(enc.summary);

  const auto [dec_inputs, golds] = teacher_forcing_pairs(example.target_ids);
  if (dec_inputs.empty()) throw std::invalid_argument("seq2seq example has no target tokens");

  std::vector<std::vector<double>> h = fc.initial_h;
  std::vector<std::vector<double>> c(layers, std::vector<double>(D, 0.0));
  std::vector<double> next_h(D), next_c(D);
  TokenTally tally;
  fc.steps.assign(dec_inputs.size(), {});
  for (std::size_t t = 0; t < dec_inputs.size(); ++t) {
    auto& st = fc.steps[t];
    st.input = dec_inputs[t];
    st.state = h[layers - 1];
    st.context.assign(ann, 0.0);
    attend_forward(aw, st.state, enc.annotations, fc.keys, keep, st.attention, st.context);

    std::vector<double> x;
    auto emb = embedding_row(params_[tgt_embedding_].value, st.input);
    x.assign(emb.begin(), emb.end());
    x.insert(x.end(), st.context.begin(), st.context.end());
    st.cells.assign(layers, {});
    for (std::size_t l = 0; l < layers; ++l) {
      lstm_forward(lstm_weights(params_, decoder_[l]), x, h[l], c[l], st.cells[l], next_h, next_c);
      h[l] = next_h;
      c[l] = next_c;
      x = next_h;
    }
    st.projection_input = h[layers - 1];
    st.projection_input.insert(st.projection_input.end(), st.context.begin(), st.context.end());
    std::vector<double> logits(params_[out_b_].value.data().begin(), params_[out_b_].value.data().end());
    matvec_acc(params_[out_w_].value, st.projection_input, logits);
    const auto gold = static_cast<std::size_t>(golds[t]);
    if (gold >= V) throw std::out_of_range("target id outside vocabulary");
    auto ce = score_position(logits, gold, tally);
    st.grad_logits = std::move(ce.grad_logits);
  }
  return tally;
}

void Seq2SeqModel::backward(const ForwardCache& fc, double grad_scale) {
  const std::size_t C = config_.encoder_cells;
  const std::size_t D = config_.decoder_cells;
  const std::size_t E = config_.embed_dim;
  const std::size_t ann = config_.annotation_dim();
  const std::size_t layers = config_.decoder_layers;
  const std::size_t T = fc.source.size();
  const std::size_t A = config_.attention_dim;
  const auto& enc = fc.encoded;

  const Mask& keep = enc.keep;
  const AttentionWeights aw{params_[attn_query_].value, params_[attn_key_].value, params_[attn_v_].value};
  AttentionGrads ag{params_[attn_query_].grad, params_[attn_key_].grad, params_[attn_v_].grad};

  std::vector<double> grad_keys(T * A, 0.0);
  std::vector<double> grad_ann(T * ann, 0.0);
  std::vector<std::vector<double>> dh_next(layers, std::vector<double>(D, 0.0));
  std::vector<std::vector<double>> dc_next(layers, std::vector<double>(D, 0.0));
  std::vector<double> dlogits;
  std::vector<double> dproj(D + ann);
  std::vector<double> dh(D), dh_prev(D), dc_prev(D);

  for (std::size_t t = fc.steps.size(); t-- > 0;) {
    const auto& st = fc.steps[t];
    dlogits = st.grad_logits;
    for (double& g : dlogits) g *= grad_scale;
    outer_acc(params_[out_w_].grad, dlogits, st.projection_input);
    axpy(1.0, dlogits, params_[out_b_].grad.data());
    std::fill(dproj.begin(), dproj.end(), 0.0);
    matvec_t_acc(params_[out_w_].value, dlogits, dproj);

    std::vector<double> grad_context(dproj.begin() + static_cast<std::ptrdiff_t>(D), dproj.end());
    std::vector<double> from_above(dproj.begin(), dproj.begin() + static_cast<std::ptrdiff_t>(D));
    for (std::size_t l = layers; l-- > 0;) {
      for (std::size_t k = 0; k < D; ++k) dh[k] = dh_next[l][k] + from_above[k];
      const auto& cell = st.cells[l];
      std::vector<double> dx(cell.x.size());
      lstm_backward(lstm_weights(params_, decoder_[l]), lstm_grads(params_, decoder_[l]), cell, dh, dc_next[l], dx,
                    dh_prev, dc_prev);
      dh_next[l] = dh_prev;
      dc_next[l] = dc_prev;
      from_above = std::move(dx);
    }
    // Layer-0 input is [embedding, context].
    auto emb_grad = params_[tgt_embedding_].grad.row(static_cast<std::size_t>(st.input));
    for (std::size_t k = 0; k < E; ++k) emb_grad[k] += from_above[k];
    for (std::size_t k = 0; k < ann; ++k) grad_context[k] += from_above[E + k];

    // The query state is the top decoder state from step t-1 (or the bridge).
    attend_backward(aw, ag, st.state, enc.annotations, keep, st.attention, grad_context, dh_next[layers - 1],
                    grad_keys, grad_ann);
  }

  // Bridge: h0 = tanh(W summary + b).
  std::vector<double> grad_summary(ann, 0.0);
  for (std::size_t l = 0; l < layers; ++l) {
    std::vector<double> dpre(D);
    for (std::size_t k = 0; k < D; ++k) {
      dpre[k] = dh_next[l][k] * (1.0 - fc.initial_h[l][k] * fc.initial_h[l][k]);
    }
    outer_acc(params_[bridge_[l][0]].grad, dpre, enc.summary);
    axpy(1.0, dpre, params_[bridge_[l][1]].grad.data());
    matvec_t_acc(params_[bridge_[l][0]].value, dpre, grad_summary);
  }

  attention_keys_backward(params_[attn_key_].value, params_[attn_key_].grad, enc.annotations, keep, grad_keys,
                          grad_ann);

  // Encoder stack, top layer first. Gradients w.r.t. each layer's outputs per
  // compact step, split by direction.
  const std::size_t n = fc.positions.size();
  std::vector<std::vector<double>> d_fwd(n, std::vector<double>(C, 0.0));
  std::vector<std::vector<double>> d_bwd(n, std::vector<double>(C, 0.0));
  for (std::size_t t = 0; t < n; ++t) {
    const double* g = grad_ann.data() + fc.positions[t] * ann;
    std::copy(g, g + C, d_fwd[t].begin());
    std::copy(g + C, g + ann, d_bwd[t].begin());
  }
  for (std::size_t k = 0; k < C; ++k) {
    d_fwd[n - 1][k] += grad_summary[k];
    d_bwd[0][k] += grad_summary[C + k];
  }

  std::vector<double> dhc(C), dcc(C), dh_rec(C), dc_rec(C);
  for (std::size_t l = config_.encoder_layers; l-- > 0;) {
    const std::size_t in = l == 0 ? E : ann;
    std::vector<std::vector<double>> d_in(n, std::vector<double>(in, 0.0));
    std::vector<double> dx(in);
    for (std::size_t d = 0; d < 2; ++d) {
      const auto w = lstm_weights(params_, encoder_[l][d]);
      const auto g = lstm_grads(params_, encoder_[l][d]);
      const auto& outputs_grad = d == 0 ? d_fwd : d_bwd;
      std::fill(dh_rec.begin(), dh_rec.end(), 0.0);
      std::fill(dc_rec.begin(), dc_rec.end(), 0.0);
      // Reverse of the processing order: forward ran 0..n-1, backward ran n-1..0.
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t t = d == 0 ? n - 1 - k : k;
        for (std::size_t q = 0; q < C; ++q) dhc[q] = outputs_grad[t][q] + dh_rec[q];
        dcc = dc_rec;
        lstm_backward(w, g, fc.encoder_steps[l][d][t], dhc, dcc, dx, dh_rec, dc_rec);
        axpy(1.0, dx, d_in[t]);
      }
    }
    if (l == 0) {
      for (std::size_t t = 0; t < n; ++t) {
        auto row = params_[src_embedding_].grad.row(static_cast<std::size_t>(fc.source[fc.positions[t]]));
        axpy(1.0, d_in[t], row);
      }
    } else {
      for (std::size_t t = 0; t < n; ++t) {
        std::copy(d_in[t].begin(), d_in[t].begin() + static_cast<std::ptrdiff_t>(C), d_fwd[t].begin());
        std::copy(d_in[t].begin() + static_cast<std::ptrdiff_t>(C), d_in[t].end(), d_bwd[t].begin());
      }
    }
  }
}

TokenTally Seq2SeqModel::accumulate(const corpus::Seq2SeqExample& example, double grad_scale) {
  ForwardCache cache;
  TokenTally tally = forward(example, &cache);
  if (grad_scale != 0.0) backward(cache, grad_scale);
  return tally;
}

TokenTally Seq2SeqModel::score(const corpus::Seq2SeqExample& example) const { return forward(example, nullptr); }

DecodeTrace Seq2SeqModel::greedy_decode(std::span<const TokenId> source_ids, std::size_t max_len) const {
  const std::size_t D = config_.decoder_cells;
  const std::size_t ann = config_.annotation_dim();
  const std::size_t layers = config_.decoder_layers;

  const EncoderOutput enc = encode(source_ids);
  const Mask& keep = enc.keep;
  const auto keys = attention_keys(params_[attn_key_].value, enc.annotations, keep);
  const AttentionWeights aw{params_[attn_query_].value, params_[attn_key_].value, params_[attn_v_].value};

  std::vector<std::vector<double>> h = initial_states(enc.summary);
  std::vector<std::vector<double>> c(layers, std::vector<double>(D, 0.0));

  DecodeTrace trace;
  TokenId input = special::kStart;
  LstmStepCache scratch;
  AttentionCache attn_cache;
  std::vector<double> context(ann), next_h(D), next_c(D);
  for (std::size_t step = 0; step < max_len; ++step) {
    attend_forward(aw, h[layers - 1], enc.annotations, keys, keep, attn_cache, context);
    trace.attention.push_back(attn_cache.weights);
    std::vector<double> x;
    auto emb = embedding_row(params_[tgt_embedding_].value, input);
    x.assign(emb.begin(), emb.end());
    x.insert(x.end(), context.begin(), context.end());
    for (std::size_t l = 0; l < layers; ++l) {
      lstm_forward(lstm_weights(params_, decoder_[l]), x, h[l], c[l], scratch, next_h, next_c);
      h[l] = next_h;
      c[l] = next_c;
      x = next_h;
    }
    std::vector<double> proj = h[layers - 1];
    proj.insert(proj.end(), context.begin(), context.end());
    std::vector<double> logits(params_[out_b_].value.data().begin(), params_[out_b_].value.data().end());
    matvec_acc(params_[out_w_].value, proj, logits);

    TokenId best = special::kEnd;
    double best_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < logits.size(); ++v) {
      const auto id = static_cast<TokenId>(v);
      if (decodable(id) && logits[v] > best_logit) {
        best_logit = logits[v];
        best = id;
      }
    }
    if (best == special::kEnd) break;
    trace.tokens.push_back(best);
    input = best;
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Training

EpochStats train_epoch(Seq2SeqModel& model, AdamOptimizer& optimizer,
                       std::span<const corpus::Seq2SeqExample> examples, std::size_t batch_size,
                       std::uint64_t seed) {
  if (examples.empty()) throw std::invalid_argument("train_epoch: no examples");
  if (batch_size == 0) throw std::invalid_argument("train_epoch: batch size must be positive");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  TokenTally epoch;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t stop = std::min(order.size(), start + batch_size);
    std::size_t tokens = 0;
    for (std::size_t i = start; i < stop; ++i) {
      tokens += teacher_forcing_pairs(examples[order[i]].target_ids).first.size();
    }
    if (tokens == 0) continue;
    model.params().zero_grad();
    TokenTally batch;
    for (std::size_t i = start; i < stop; ++i) {
      batch.merge(model.accumulate(examples[order[i]], 1.0 / static_cast<double>(tokens)));
    }
    const auto stats = batch.stats();
    if (!std::isfinite(stats.mean_loss)) {
      throw NumericError("seq2seq training: non-finite loss in batch starting at " + std::to_string(start));
    }
    optimizer.step(model.params());
    epoch.merge(batch);
  }
  return epoch.stats();
}

EpochStats evaluate(const Seq2SeqModel& model, std::span<const corpus::Seq2SeqExample> examples) {
  TokenTally tally;
  for (const auto& ex : examples) tally.merge(model.score(ex));
  return tally.stats();
}

}  // namespace hashtag::seq2seq
