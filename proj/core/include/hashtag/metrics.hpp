#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace hashtag::metrics {

using Tokens = std::vector<std::string>;

// ---------------------------------------------------------------------------
// Sentence-level n-gram metrics, single reference.

/// BLEU with clipped precisions for n = 1..min(4, |hyp|), uniform weights,
/// brevity penalty, no smoothing: any zero precision gives 0.
double bleu(const Tokens& hypothesis, const Tokens& reference);

// NIST information weights built from a reference corpus:
//   info(w1..wn) = log2(count(w1..wn-1) / count(w1..wn)),
// with the empty-prefix count equal to the total number of unigrams.
class NistInfo {
 public:
  static constexpr std::size_t kMaxOrder = 5;

  NistInfo() = default;
  explicit NistInfo(std::span<const Tokens> references, std::size_t max_order = kMaxOrder);

  /// 0 for n-grams never seen in the reference corpus.
  double info(const Tokens& ngram) const;
  std::size_t max_order() const { return max_order_; }
  std::size_t total_unigrams() const { return total_unigrams_; }

 private:
  std::size_t max_order_ = kMaxOrder;
  std::size_t total_unigrams_ = 0;
  std::map<Tokens, std::size_t> counts_;
};

/// Sum over n of (info of clipped matched n-grams / hypothesis n-gram count),
/// times exp(beta * ln^2(min(|hyp|/|ref|, 1))), beta = ln(0.5)/ln^2(1.5).
double nist(const Tokens& hypothesis, const Tokens& reference, const NistInfo& info);

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double fmean = 0.0;
  double penalty = 0.0;
  double score = 0.0;
};

/// Exact-match METEOR: alignment maximizing matches, then minimizing chunks.
/// F = 10PR/(R+9P), penalty = 0.5 (chunks/m)^3, score = F (1 - penalty).
MeteorAlignment meteor_alignment(const Tokens& hypothesis, const Tokens& reference);
double meteor(const Tokens& hypothesis, const Tokens& reference);

// ---------------------------------------------------------------------------
// Descriptive statistics

struct Descriptive {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;                    // sample (n-1) standard deviation, 0 when n == 1
  std::optional<double> cv_percent;   // unset when mean == 0
};

/// Throws std::invalid_argument on empty input.
Descriptive descriptive_stats(std::span<const double> values);

/// 100 * sd / mean, unset when mean == 0.
std::optional<double> cv_percent(double mean, double sd);

struct Normalized {
  std::vector<double> values;
  bool degenerate = false;  // fewer than two distinct inputs; everything mapped to 0
};

Normalized min_max_normalize(std::span<const double> values);

/// "0.794 ± 0.349"
std::string format_mean_sd(double mean, double sd, int decimals = 3);

// ---------------------------------------------------------------------------
// Prediction files and reports

struct PredictionRecord {
  std::string id;
  std::string review_text;
  std::string original_title;
  std::string predicted_title;
  std::string model_kind;

  nlohmann::json to_json() const;
  static PredictionRecord from_json(const nlohmann::json& doc);
};

struct PredictionFile {
  std::vector<PredictionRecord> records;
  std::size_t skipped_lines = 0;
};

/// Malformed lines (and duplicate ids) are skipped and counted.
PredictionFile read_predictions(const std::filesystem::path& path);

struct CreativityStats {
  std::size_t unique_predictions = 0;
  std::size_t vocab_used_count = 0;
  std::size_t original_vocab_size = 0;
  double vocab_used_percent = 0.0;
};

CreativityStats creativity_stats(std::span<const PredictionRecord> predictions);

struct WordCount {
  std::string token;
  std::size_t count = 0;
  bool operator==(const WordCount&) const = default;
};

/// Descending count, lexicographic tie-break, punctuation and special tokens excluded.
std::vector<WordCount> word_frequencies(std::span<const std::string> texts, std::size_t top_k);

struct MetricSummary {
  std::vector<double> scores;
  Descriptive stats;
  double normalized_mean = 0.0;
  bool normalization_degenerate = false;
};

struct LengthStats {
  Descriptive original;
  Descriptive predicted;
};

struct MetricReport {
  std::size_t rows = 0;
  std::size_t skipped_lines = 0;
  std::map<std::string, MetricSummary> metrics;  // "bleu", "nist", "meteor"
  CreativityStats creativity;
  LengthStats lengths;

  nlohmann::json to_json() const;
};

/// Scores every prediction against its original title. The NIST information
/// table comes from `info_corpus` when given, else from the original titles.
MetricReport evaluate_predictions(std::span<const PredictionRecord> predictions,
                                  std::optional<std::span<const Tokens>> info_corpus = std::nullopt);

/// Throws DataError when the file holds no valid rows.
MetricReport evaluate_file(const std::filesystem::path& predictions,
                           const std::optional<std::filesystem::path>& info_corpus = std::nullopt);

/// Length and creativity block of a report (no per-row metrics).
nlohmann::json length_and_creativity_json(std::span<const PredictionRecord> predictions);

nlohmann::json to_json(const Descriptive& d);

// ---------------------------------------------------------------------------
// metricF: three-point human judgments

inline constexpr double kMetricFSampleTargetPercent = 6.0;

struct AnnotationScore {
  std::string item_id;
  std::string source;  // "original", "bilstm" or "maskedlm"
  double score = 0.0;
  std::string annotator;
  std::string timestamp;

  nlohmann::json to_json() const;
  /// Throws DataError on missing fields or a score off the 0/0.5/1 scale.
  static AnnotationScore from_json(const nlohmann::json& doc);
};

bool is_valid_source(std::string_view source);

/// True for exactly 0, 0.5 and 1.
bool is_valid_metricf_score(double score);

struct MetricFSummary {
  std::size_t count = 0;
  std::optional<double> mean;
  std::optional<double> sd;
  double coverage_percent = 0.0;
  bool meets_sample_target = false;

  nlohmann::json to_json() const;
};

/// Aggregates scores (optionally only those of `source`); coverage is relative
/// to `total_items` of that source. Throws std::invalid_argument if any score
/// is off the scale.
MetricFSummary metricf_aggregate(std::span<const AnnotationScore> scores, std::optional<std::string_view> source,
                                 std::size_t total_items);

}  // namespace hashtag::metrics
