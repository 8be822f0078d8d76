#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hashtag/checkpoint.hpp"
#include "hashtag/corpus.hpp"
#include "hashtag/metrics.hpp"
#include "hashtag/training.hpp"

namespace hashtag::pipeline {

// Bad flags or a refused overwrite; the CLI maps it to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dataset directory layout written by preprocess().
inline constexpr const char* kVocabFile = "vocab.json";
inline constexpr const char* kSummaryFile = "preprocess_summary.json";
inline constexpr std::array<const char*, 3> kSplits = {"train", "val", "test"};

std::filesystem::path records_file(const std::filesystem::path& dir, std::string_view split);
std::filesystem::path dataset_file(const std::filesystem::path& dir, std::string_view model, std::string_view split);

enum class ModelKind { bilstm, maskedlm };
ModelKind parse_model_kind(std::string_view name);
std::string_view model_name(ModelKind kind);

struct PreprocessOptions {
  std::filesystem::path input;
  std::filesystem::path outdir;
  std::vector<ModelKind> models{ModelKind::bilstm, ModelKind::maskedlm};
  corpus::CsvSchema schema;
  corpus::SplitRatios ratios;
  std::uint64_t seed = 42;
  std::size_t vocab_cap = corpus::kDefaultVocabCap;
  corpus::ExampleOptions examples;
  bool force = false;
};

/// Loads, cleans, splits and encodes a review CSV. The vocabulary is built
/// from the training split only. Returns the summary that is also written
/// to the dataset directory.
nlohmann::json preprocess(const PreprocessOptions& options, std::ostream* log = nullptr);

std::vector<corpus::ReviewRecord> read_records(const std::filesystem::path& path);
std::vector<corpus::Seq2SeqExample> read_seq2seq_examples(const std::filesystem::path& path);
std::vector<corpus::MaskedStepExample> read_masked_examples(const std::filesystem::path& path);
Vocabulary read_vocabulary(const std::filesystem::path& path);

// tiny: test-sized dims; standard: the default dims of each model;
// base: the 12-layer masked LM shape (masked LM only).
enum class Preset { tiny, standard, base };
Preset parse_preset(std::string_view name);

struct TrainOptions {
  ModelKind model = ModelKind::bilstm;
  std::filesystem::path data_dir;
  std::filesystem::path checkpoint;
  std::filesystem::path history;
  Preset preset = Preset::standard;
  FitOptions fit;
  double learning_rate = 1e-3;
  bool force = false;
};

struct TrainResult {
  std::vector<HistoryEntry> history;
  std::size_t train_examples = 0;
  std::size_t val_examples = 0;
};

TrainResult train(const TrainOptions& options, std::ostream* log = nullptr);

/// Cleaned review text and title with the model's prediction. `max_title_len`
/// caps seq2seq decoding; masked-LM generation runs until SEP or a full context.
std::vector<metrics::PredictionRecord> predict(const ModelBundle& bundle, std::span<const corpus::ReviewRecord> records,
                                               std::size_t max_title_len = corpus::kDefaultTargetLen);

std::string predict_one(const ModelBundle& bundle, std::string_view cleaned_text, std::size_t max_title_len);

void write_jsonl(const std::filesystem::path& path, std::span<const metrics::PredictionRecord> records);

/// Throws UsageError when `path` exists and overwriting was not requested.
void ensure_writable(const std::filesystem::path& path, bool force);

void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace hashtag::pipeline
