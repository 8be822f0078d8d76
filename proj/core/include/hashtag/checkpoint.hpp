#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "hashtag/maskedlm.hpp"
#include "hashtag/seq2seq.hpp"
#include "hashtag/tensor.hpp"
#include "hashtag/vocabulary.hpp"

namespace hashtag {

inline constexpr int kCheckpointFormatVersion = 1;
inline constexpr std::string_view kSeq2SeqKind = "bilstm_seq2seq";
inline constexpr std::string_view kMaskedLMKind = "masked_lm";

// {"name": {"shape": [...], "data": [...]}, ...}
nlohmann::json params_to_json(const ParameterSet& params);

/// Copies values into an already-shaped parameter set. Every parameter must be
/// present with the expected shape and no unknown names are allowed.
void params_from_json(ParameterSet& params, const nlohmann::json& doc);

struct Seq2SeqBundle {
  seq2seq::Seq2SeqModel model;
  Vocabulary vocab;
};

struct MaskedLMBundle {
  mlm::MaskedLMModel model;
  Vocabulary vocab;
};

using ModelBundle = std::variant<Seq2SeqBundle, MaskedLMBundle>;

nlohmann::json checkpoint_json(const seq2seq::Seq2SeqModel& model, const Vocabulary& vocab);
nlohmann::json checkpoint_json(const mlm::MaskedLMModel& model, const Vocabulary& vocab);

void save_checkpoint(const std::filesystem::path& path, const seq2seq::Seq2SeqModel& model, const Vocabulary& vocab);
void save_checkpoint(const std::filesystem::path& path, const mlm::MaskedLMModel& model, const Vocabulary& vocab);

ModelBundle checkpoint_from_json(const nlohmann::json& doc);
ModelBundle load_checkpoint(const std::filesystem::path& path);

}  // namespace hashtag
