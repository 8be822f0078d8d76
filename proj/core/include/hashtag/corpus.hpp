#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hashtag/vocabulary.hpp"

namespace hashtag::corpus {

inline constexpr std::size_t kMaxSourceLen = 60;
inline constexpr std::size_t kMaxMaskedLen = 72;
inline constexpr std::size_t kDefaultTargetLen = 16;
inline constexpr std::size_t kDefaultVocabCap = 4000;

struct ReviewRecord {
  std::string id;
  std::string title_raw;
  std::string text_raw;
};

struct CsvSchema {
  std::string title_column = "review_title";
  std::string text_column = "review_text";
  // Optional id column; rows are numbered ("row-<n>") when empty or absent.
  std::string id_column;
  bool strict = false;
};

struct LoadResult {
  std::vector<ReviewRecord> records;
  std::size_t dropped_empty = 0;
  std::size_t malformed = 0;
  std::vector<std::string> warnings;
};

/// Reads a UTF-8 CSV with a header row. Rows with an empty (after trimming)
/// title or text are dropped and counted. Malformed rows are skipped with a
/// warning, or raise DataError when schema.strict is set.
LoadResult load_reviews(const std::filesystem::path& path, const CsvSchema& schema = {});
LoadResult load_reviews(std::istream& in, const CsvSchema& schema = {});

/// Maps tokens to ids (UNK for unknown), truncates to max_len and optionally
/// right-pads with PAD up to max_len.
std::vector<TokenId> encode(std::string_view cleaned, const Vocabulary& vocab, std::size_t max_len,
                            bool pad);

/// Inverse of encode, dropping PAD ids.
std::string decode(std::span<const TokenId> ids, const Vocabulary& vocab);

struct Seq2SeqExample {
  std::string id;
  std::vector<TokenId> source_ids;  // padded to max source length
  std::vector<TokenId> target_ids;  // START ... END, padded to target length + 2
};

struct MaskedStepExample {
  std::string id;
  std::vector<TokenId> context_ids;  // text SEP prefix MASK, padded to 72
  std::size_t mask_position = 0;
  TokenId target_id = special::kPad;
};

struct ExampleOptions {
  std::size_t max_source_len = kMaxSourceLen;
  std::size_t max_target_len = kDefaultTargetLen;  // title words, excluding START/END
  std::size_t max_context_len = kMaxMaskedLen;
};

/// Returns nullopt when the cleaned title or text is empty.
std::optional<Seq2SeqExample> make_seq2seq_example(const ReviewRecord& record, const Vocabulary& vocab,
                                                   const ExampleOptions& options = {});

/// One example per title token plus a terminating SEP example. Returns an
/// empty list when the cleaned title/text is empty or the longest context
/// would exceed options.max_context_len (the record is dropped whole).
std::vector<MaskedStepExample> expand_masked_examples(const ReviewRecord& record,
                                                      const Vocabulary& vocab,
                                                      const ExampleOptions& options = {});

struct SplitRatios {
  double train = 0.70;
  double validation = 0.15;
  double test = 0.15;
};

struct CorpusSplit {
  std::vector<ReviewRecord> train;
  std::vector<ReviewRecord> validation;
  std::vector<ReviewRecord> test;
  std::uint64_t seed = 0;
  SplitRatios ratios;
};

/// Seeded shuffle, then contiguous slicing. Validation and test sizes are
/// floor(n * ratio); train receives the remainder.
CorpusSplit split_corpus(std::vector<ReviewRecord> records, const SplitRatios& ratios,
                         std::uint64_t seed);

/// Records whose cleaned title and text are both non-empty.
std::vector<ReviewRecord> filter_cleanable(std::vector<ReviewRecord> records, std::size_t* dropped);

// JSON-lines encodings of the two training framings.
nlohmann::json to_json(const Seq2SeqExample& ex);
nlohmann::json to_json(const MaskedStepExample& ex);
Seq2SeqExample seq2seq_example_from_json(const nlohmann::json& doc);
MaskedStepExample masked_example_from_json(const nlohmann::json& doc);

// Cleaned record files kept next to the datasets so predictions can report
// the review text and original title verbatim.
nlohmann::json to_json(const ReviewRecord& record);
ReviewRecord record_from_json(const nlohmann::json& doc);

}  // namespace hashtag::corpus
