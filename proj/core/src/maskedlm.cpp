#include "hashtag/maskedlm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "hashtag/error.hpp"
#include "hashtag/rng.hpp"

namespace hashtag::mlm {

TransformerConfig TransformerConfig::base(std::size_t vocab_size) {
  TransformerConfig c;
  c.layers = 12;
  c.hidden = 768;
  c.heads = 12;
  c.ffn_dim = 3072;
  c.vocab_size = vocab_size;
  return c;
}

TransformerConfig TransformerConfig::tiny(std::size_t vocab_size) {
  TransformerConfig c;
  c.layers = 1;
  c.hidden = 32;
  c.heads = 2;
  c.ffn_dim = 64;
  c.vocab_size = vocab_size;
  c.dropout = 0.0;
  return c;
}

void TransformerConfig::validate() const {
  if (layers == 0 || hidden == 0 || heads == 0 || ffn_dim == 0 || vocab_size <= special::kCount) {
    throw std::invalid_argument("transformer config: dimensions must be positive and vocab_size > 6");
  }
  if (hidden % heads != 0) throw std::invalid_argument("transformer config: H must be divisible by A");
  if (max_len < 2) throw std::invalid_argument("transformer config: max_len must be at least 2");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("transformer config: dropout must be in [0, 1)");
}

nlohmann::json TransformerConfig::to_json() const {
  return {{"L", layers},         {"H", hidden},         {"A", heads},         {"ffn_dim", ffn_dim},
          {"max_len", max_len}, {"vocab_size", vocab_size}, {"dropout", dropout}};
}

TransformerConfig TransformerConfig::from_json(const nlohmann::json& doc) {
  TransformerConfig c;
  try {
    c.layers = doc.at("L").get<std::size_t>();
    c.hidden = doc.at("H").get<std::size_t>();
    c.heads = doc.at("A").get<std::size_t>();
    c.ffn_dim = doc.at("ffn_dim").get<std::size_t>();
    c.max_len = doc.at("max_len").get<std::size_t>();
    c.vocab_size = doc.at("vocab_size").get<std::size_t>();
    c.dropout = doc.at("dropout").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad transformer config: ") + e.what());
  }
  c.validate();
  return c;
}

MaskedLMModel::MaskedLMModel(const TransformerConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const std::size_t H = config_.hidden;
  token_embedding_ = params_.add("token_embedding", {config_.vocab_size, H});
  position_embedding_ = params_.add("position_embedding", {config_.max_len, H});
  for (std::size_t l = 0; l < config_.layers; ++l) {
    blocks_.push_back(add_block_params(params_, "block" + std::to_string(l) + ".", H, config_.ffn_dim));
  }
  final_gamma_ = params_.add("final_ln.gamma", {H});
  final_beta_ = params_.add("final_ln.beta", {H});
  lm_bias_ = params_.add("lm_head.bias", {config_.vocab_size});

  Rng rng(seed);
  init_xavier_uniform(params_[token_embedding_].value, rng);
  init_xavier_uniform(params_[position_embedding_].value, rng);
  for (const auto& b : blocks_) init_block_params(params_, b, rng);
  params_[final_gamma_].value.fill(1.0);
}

struct MaskedLMModel::ForwardCache {
  std::vector<TokenId> ids;
  std::size_t rows = 0;
  std::size_t mask_position = 0;
  std::vector<BlockCache> blocks;
  LayerNormCache final_ln;
  std::vector<double> final_row;
};

std::vector<double> MaskedLMModel::forward(std::span<const TokenId> context_ids, std::size_t mask_position,
                                           ForwardCache* cache, Rng* dropout_rng) const {
  if (context_ids.size() > config_.max_len) throw std::invalid_argument("context longer than max_len");
  if (mask_position >= context_ids.size()) throw std::invalid_argument("mask position out of bounds");
  if (context_ids[mask_position] != special::kMask) throw std::invalid_argument("mask position does not hold MASK");

  // Trailing padding is dropped; interior PADs stay but are masked as keys.
  std::size_t rows = context_ids.size();
  while (rows > mask_position + 1 && context_ids[rows - 1] == special::kPad) --rows;

  const std::size_t H = config_.hidden;
  const Tensor& emb = params_[token_embedding_].value;
  const Tensor& pos = params_[position_embedding_].value;
  std::vector<double> x(rows * H);
  std::vector<std::uint8_t> keep(rows);
  for (std::size_t t = 0; t < rows; ++t) {
    const TokenId id = context_ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
    }
    keep[t] = id != special::kPad;
    const auto e = emb.row(static_cast<std::size_t>(id));
    const auto p = pos.row(t);
    for (std::size_t d = 0; d < H; ++d) x[t * H + d] = e[d] + p[d];
  }

  ForwardCache local;
  ForwardCache& fc = cache ? *cache : local;
  fc.ids.assign(context_ids.begin(), context_ids.begin() + static_cast<std::ptrdiff_t>(rows));
  fc.rows = rows;
  fc.mask_position = mask_position;
  fc.blocks.assign(blocks_.size(), {});
  const DropoutSpec dropout{config_.dropout, dropout_rng};
  std::vector<double> y(rows * H);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    block_forward(params_, blocks_[l], config_.heads, x, rows, keep, fc.blocks[l], y, dropout);
    x.swap(y);
  }

  fc.final_row.assign(H, 0.0);
  layer_norm_forward(std::span<const double>(x).subspan(mask_position * H, H), 1, H, params_[final_gamma_].value,
                     params_[final_beta_].value, fc.final_ln, fc.final_row);
  const auto bias = params_[lm_bias_].value.data();
  std::vector<double> logits(bias.begin(), bias.end());
  matvec_acc(emb, fc.final_row, logits);
  return logits;
}

void MaskedLMModel::backward(const ForwardCache& fc, std::span<const double> grad_logits) {
  const std::size_t H = config_.hidden;
  const std::size_t rows = fc.rows;
  Parameter& emb = params_[token_embedding_];

  axpy(1.0, grad_logits, params_[lm_bias_].grad.data());
  outer_acc(emb.grad, grad_logits, fc.final_row);
  std::vector<double> grad_row(H, 0.0);
  matvec_t_acc(emb.value, grad_logits, grad_row);

  std::vector<double> grad_x(rows * H, 0.0);
  layer_norm_backward(grad_row, 1, H, params_[final_gamma_].value, fc.final_ln, params_[final_gamma_].grad,
                      params_[final_beta_].grad, std::span<double>(grad_x).subspan(fc.mask_position * H, H));

  std::vector<double> grad_in(rows * H);
  for (std::size_t l = blocks_.size(); l-- > 0;) {
    block_backward(params_, blocks_[l], config_.heads, fc.blocks[l], grad_x, grad_in);
    grad_x.swap(grad_in);
  }

  Parameter& pos = params_[position_embedding_];
  for (std::size_t t = 0; t < rows; ++t) {
    const auto g = std::span<const double>(grad_x).subspan(t * H, H);
    axpy(1.0, g, emb.grad.row(static_cast<std::size_t>(fc.ids[t])));
    axpy(1.0, g, pos.grad.row(t));
  }
}

std::vector<double> MaskedLMModel::forward_mask_logits(std::span<const TokenId> context_ids,
                                                       std::size_t mask_position) const {
  return forward(context_ids, mask_position, nullptr, nullptr);
}

TokenTally MaskedLMModel::accumulate(const corpus::MaskedStepExample& example, double grad_scale, Rng* dropout_rng) {
  ForwardCache cache;
  const auto logits = forward(example.context_ids, example.mask_position, &cache, dropout_rng);
  TokenTally tally;
  auto ce = score_position(logits, static_cast<std::size_t>(example.target_id), tally);
  if (grad_scale != 0.0) {
    for (double& g : ce.grad_logits) g *= grad_scale;
    backward(cache, ce.grad_logits);
  }
  return tally;
}

TokenTally MaskedLMModel::score(const corpus::MaskedStepExample& example) const {
  const auto logits = forward(example.context_ids, example.mask_position, nullptr, nullptr);
  TokenTally tally;
  score_position(logits, static_cast<std::size_t>(example.target_id), tally);
  return tally;
}

std::vector<std::vector<double>> MaskedLMModel::attention_probabilities(std::span<const TokenId> context_ids) const {
  const auto it = std::find(context_ids.begin(), context_ids.end(), special::kMask);
  if (it == context_ids.end()) throw std::invalid_argument("context has no MASK");
  ForwardCache cache;
  forward(context_ids, static_cast<std::size_t>(it - context_ids.begin()), &cache, nullptr);
  std::vector<std::vector<double>> out;
  for (const auto& b : cache.blocks) out.push_back(b.probs);
  return out;
}

bool generatable(TokenId id) { return id == special::kSep || !Vocabulary::is_special(id); }

GenerationTrace generate_autoregressive(const MaskPredictor& predictor, std::span<const TokenId> review_ids,
                                        std::size_t max_total_len) {
  if (max_total_len < 2) throw std::invalid_argument("max_total_len must leave room for SEP and MASK");
  GenerationTrace trace;
  std::vector<TokenId> review(review_ids.begin(), review_ids.end());
  while (!review.empty() && review.back() == special::kPad) review.pop_back();
  if (review.size() + 2 > max_total_len) {
    review.resize(max_total_len - 2);
    trace.review_truncated = true;
  }

  std::vector<TokenId> context = review;
  context.push_back(special::kSep);
  while (context.size() + 1 <= max_total_len) {
    const std::size_t mask_position = context.size();
    context.push_back(special::kMask);
    trace.contexts.push_back(context);
    const TokenId predicted = predictor(context, mask_position);
    trace.predictions.push_back(predicted);
    context.pop_back();
    if (!generatable(predicted) || predicted == special::kSep) break;
    context.push_back(predicted);
    trace.tokens.push_back(predicted);
  }
  return trace;
}

MaskPredictor model_predictor(const MaskedLMModel& model) {
  return [&model](std::span<const TokenId> context, std::size_t mask_position) {
    const auto logits = model.forward_mask_logits(context, mask_position);
    TokenId best = special::kSep;
    double best_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < logits.size(); ++v) {
      const auto id = static_cast<TokenId>(v);
      if (generatable(id) && logits[v] > best_logit) {
        best_logit = logits[v];
        best = id;
      }
    }
    return best;
  };
}

EpochStats train_epoch(MaskedLMModel& model, AdamOptimizer& optimizer,
                       std::span<const corpus::MaskedStepExample> examples, std::size_t batch_size,
                       std::uint64_t seed) {
  if (examples.empty()) throw std::invalid_argument("train_epoch: no examples");
  if (batch_size == 0) throw std::invalid_argument("train_epoch: batch size must be positive");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  Rng dropout_rng(seed ^ 0x9e3779b97f4a7c15ULL);

  TokenTally epoch;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t stop = std::min(order.size(), start + batch_size);
    const double scale = 1.0 / static_cast<double>(stop - start);
    model.params().zero_grad();
    TokenTally batch;
    for (std::size_t i = start; i < stop; ++i) {
      batch.merge(model.accumulate(examples[order[i]], scale, &dropout_rng));
    }
    if (!std::isfinite(batch.stats().mean_loss)) {
      throw NumericError("masked LM training: non-finite loss in batch starting at " + std::to_string(start));
    }
    optimizer.step(model.params());
    epoch.merge(batch);
  }
  return epoch.stats();
}

EpochStats evaluate(const MaskedLMModel& model, std::span<const corpus::MaskedStepExample> examples) {
  TokenTally tally;
  for (const auto& ex : examples) tally.merge(model.score(ex));
  return tally.stats();
}

}  // namespace hashtag::mlm
