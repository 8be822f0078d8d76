#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "hashtag/corpus.hpp"
#include "hashtag/optimizer.hpp"
#include "hashtag/tensor.hpp"
#include "hashtag/training.hpp"
#include "hashtag/transformer.hpp"
#include "hashtag/vocabulary.hpp"

namespace hashtag::mlm {

struct TransformerConfig {
  std::size_t layers = 2;      // L
  std::size_t hidden = 64;     // H
  std::size_t heads = 2;       // A
  std::size_t ffn_dim = 128;
  std::size_t max_len = corpus::kMaxMaskedLen;
  std::size_t vocab_size = 0;
  double dropout = 0.1;

  /// BERT-BASE shape (L=12, H=768, A=12, FFN 3072). Accepted, but slow on a CPU.
  static TransformerConfig base(std::size_t vocab_size);
  static TransformerConfig tiny(std::size_t vocab_size);

  void validate() const;
  nlohmann::json to_json() const;
  static TransformerConfig from_json(const nlohmann::json& doc);
  bool operator==(const TransformerConfig&) const = default;
};

// Encoder-only masked LM with learned positions and an LM head tied to the
// token embeddings (plus an output bias).
class MaskedLMModel {
 public:
  MaskedLMModel(const TransformerConfig& config, std::uint64_t seed);

  const TransformerConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  /// LM-head logits at `mask_position`. PAD tokens never serve as attention
  /// keys. Throws std::invalid_argument if the context is too long or the
  /// position is out of range / not MASK.
  std::vector<double> forward_mask_logits(std::span<const TokenId> context_ids, std::size_t mask_position) const;

  /// Cross entropy at the mask slot; accumulates grad_scale * dLoss into
  /// params when grad_scale != 0. Dropout is applied when `dropout_rng` is set.
  TokenTally accumulate(const corpus::MaskedStepExample& example, double grad_scale, Rng* dropout_rng = nullptr);

  TokenTally score(const corpus::MaskedStepExample& example) const;

  /// Per-layer, per-head attention rows from an inference pass (for
  /// inspection and invariant checks): [layer][head * T * T], where T is the
  /// context length after trailing PAD is dropped.
  std::vector<std::vector<double>> attention_probabilities(std::span<const TokenId> context_ids) const;

 private:
  struct ForwardCache;
  std::vector<double> forward(std::span<const TokenId> context_ids, std::size_t mask_position, ForwardCache* cache,
                              Rng* dropout_rng) const;
  void backward(const ForwardCache& cache, std::span<const double> grad_logits);

  TransformerConfig config_;
  ParameterSet params_;
  std::size_t token_embedding_ = 0;
  std::size_t position_embedding_ = 0;
  std::vector<BlockParams> blocks_;
  std::size_t final_gamma_ = 0;
  std::size_t final_beta_ = 0;
  std::size_t lm_bias_ = 0;
};

/// Tokens the generator may emit: regular words and the SEP terminator.
bool generatable(TokenId id);

// Predicts the token for the single MASK in `context` at `mask_position`.
using MaskPredictor = std::function<TokenId(std::span<const TokenId> context, std::size_t mask_position)>;

struct GenerationTrace {
  std::vector<std::vector<TokenId>> contexts;  // exactly what the predictor saw, unpadded
  std::vector<TokenId> predictions;            // one per context
  std::vector<TokenId> tokens;                 // generated title, without the terminal SEP
  bool review_truncated = false;
};

/// Autoregressive append-MASK decoding: context = review SEP generated MASK;
/// the prediction replaces MASK and a new MASK is appended, until the
/// predictor returns SEP (or any other non-word special) or the context would
/// exceed max_total_len. Reviews that leave no room for "SEP MASK" are
/// truncated from the right.
GenerationTrace generate_autoregressive(const MaskPredictor& predictor, std::span<const TokenId> review_ids,
                                        std::size_t max_total_len = corpus::kMaxMaskedLen);

/// Argmax over generatable tokens.
MaskPredictor model_predictor(const MaskedLMModel& model);

EpochStats train_epoch(MaskedLMModel& model, AdamOptimizer& optimizer,
                       std::span<const corpus::MaskedStepExample> examples, std::size_t batch_size,
                       std::uint64_t seed);

EpochStats evaluate(const MaskedLMModel& model, std::span<const corpus::MaskedStepExample> examples);

}  // namespace hashtag::mlm
