#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hashtag/corpus.hpp"
#include "hashtag/ops.hpp"
#include "hashtag/optimizer.hpp"
#include "hashtag/tensor.hpp"
#include "hashtag/training.hpp"
#include "hashtag/vocabulary.hpp"

namespace hashtag::seq2seq {

using Mask = std::vector<std::uint8_t>;

struct Seq2SeqConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 64;
  std::size_t encoder_layers = 3;
  std::size_t encoder_cells = 32;
  std::size_t decoder_layers = 2;
  std::size_t decoder_cells = 64;
  std::size_t max_source_len = corpus::kMaxSourceLen;
  std::size_t max_target_len = corpus::kDefaultTargetLen;
  std::size_t attention_dim = 64;

  /// Encoder 3x32 bidirectional, decoder 2x64.
  static Seq2SeqConfig paper(std::size_t vocab_size);
  /// Small dims for tests and the bundled sample corpus.
  static Seq2SeqConfig tiny(std::size_t vocab_size);

  std::size_t annotation_dim() const { return 2 * encoder_cells; }
  void validate() const;

  nlohmann::json to_json() const;
  static Seq2SeqConfig from_json(const nlohmann::json& doc);
  bool operator==(const Seq2SeqConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Additive attention: e_j = v . tanh(W_q s + W_k h_j), weights = masked softmax(e).

struct AttentionWeights {
  const Tensor& w_query;  // [A x state]
  const Tensor& w_key;    // [A x annotation]
  const Tensor& v;        // [A]
};

struct AttentionGrads {
  Tensor& w_query;
  Tensor& w_key;
  Tensor& v;
};

struct AttentionCache {
  std::vector<double> hidden;   // [T x A], tanh activations (zero rows where masked)
  std::vector<double> weights;  // [T]
};

struct AttentionResult {
  std::vector<double> context;
  std::vector<double> weights;
};

/// keys = W_k h_j for every position, [T x A]; computed once per source.
std::vector<double> attention_keys(const Tensor& w_key, const Tensor& annotations,
                                   std::span<const std::uint8_t> keep);

void attend_forward(const AttentionWeights& w, std::span<const double> state, const Tensor& annotations,
                    std::span<const double> keys, std::span<const std::uint8_t> keep, AttentionCache& cache,
                    std::span<double> context);

/// Accumulates parameter gradients, d(state), d(keys) and d(annotations).
/// Gradients flowing through `keys` into W_k are applied by the caller via
/// attention_keys_backward.
void attend_backward(const AttentionWeights& w, AttentionGrads grads, std::span<const double> state,
                     const Tensor& annotations, std::span<const std::uint8_t> keep, const AttentionCache& cache,
                     std::span<const double> grad_context, std::span<double> grad_state_acc,
                     std::span<double> grad_keys_acc, std::span<double> grad_annotations_acc);

void attention_keys_backward(const Tensor& w_key, Tensor& grad_w_key, const Tensor& annotations,
                             std::span<const std::uint8_t> keep, std::span<const double> grad_keys,
                             std::span<double> grad_annotations_acc);

/// One-shot attention (no gradients). Throws std::invalid_argument when every
/// position is masked.
AttentionResult attend(const AttentionWeights& w, std::span<const double> state, const Tensor& annotations,
                       std::span<const std::uint8_t> keep);

// ---------------------------------------------------------------------------

struct EncoderOutput {
  Tensor annotations;      // [T x 2C]; row j = [forward_j, backward_j], zero rows at PAD
  Mask keep;               // 0 at PAD positions
  std::vector<double> summary;  // [last forward state, first backward state]
};

struct DecodeTrace {
  std::vector<TokenId> tokens;                    // excludes END
  std::vector<std::vector<double>> attention;     // one weight vector per decode step
};

class Seq2SeqModel {
 public:
  Seq2SeqModel(const Seq2SeqConfig& config, std::uint64_t seed);

  const Seq2SeqConfig& config() const { return config_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  /// Bidirectional encoder stack over the non-PAD tokens of `source_ids`.
  EncoderOutput encode(std::span<const TokenId> source_ids) const;

  /// Teacher-forced loss on one example. When `grad_scale` is non-zero the
  /// gradient of (grad_scale * summed token loss) is accumulated into params.
  /// Returns per-token loss/accuracy tallies.
  TokenTally accumulate(const corpus::Seq2SeqExample& example, double grad_scale);

  /// Summed token loss without touching gradients.
  TokenTally score(const corpus::Seq2SeqExample& example) const;

  /// Greedy decoding from START; stops at END or after max_len tokens.
  DecodeTrace greedy_decode(std::span<const TokenId> source_ids, std::size_t max_len) const;

 private:
  struct ForwardCache;
  std::vector<std::vector<double>> initial_states(std::span<const double> summary) const;
  EncoderOutput run_encoder(std::span<const TokenId> source_ids, ForwardCache* cache) const;
  TokenTally forward(const corpus::Seq2SeqExample& example, ForwardCache* cache) const;
  void backward(const ForwardCache& cache, double grad_scale);

  Seq2SeqConfig config_;
  ParameterSet params_;
  // Parameter indices.
  std::size_t src_embedding_ = 0;
  std::size_t tgt_embedding_ = 0;
  std::vector<std::array<std::array<std::size_t, 3>, 2>> encoder_;  // [layer][dir][wx,wh,b]
  std::vector<std::array<std::size_t, 2>> bridge_;                   // [layer][w,b]
  std::vector<std::array<std::size_t, 3>> decoder_;                  // [layer][wx,wh,b]
  std::size_t attn_query_ = 0;
  std::size_t attn_key_ = 0;
  std::size_t attn_v_ = 0;
  std::size_t out_w_ = 0;
  std::size_t out_b_ = 0;
};

/// Decoder input / gold pairs for a padded target: inputs are target[0..S),
/// golds are target[1..S], where S+1 is the non-PAD target length.
std::pair<std::vector<TokenId>, std::vector<TokenId>> teacher_forcing_pairs(std::span<const TokenId> target_ids);

/// Tokens the decoder is allowed to emit: regular words and END.
bool decodable(TokenId id);

EpochStats train_epoch(Seq2SeqModel& model, AdamOptimizer& optimizer,
                       std::span<const corpus::Seq2SeqExample> examples, std::size_t batch_size,
                       std::uint64_t seed);

EpochStats evaluate(const Seq2SeqModel& model, std::span<const corpus::Seq2SeqExample> examples);

}  // namespace hashtag::seq2seq
