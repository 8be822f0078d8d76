#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hashtag/metrics.hpp"

namespace hashtag::annotation {

inline constexpr std::string_view kPrompt =
    "Does this sentence look like a good or bad Ecommerce product page hashtag?";
inline constexpr double kDefaultSampleFraction = 0.06;

struct AnnotationItem {
  std::string item_id;
  std::string review_text;
  std::string candidate_title;
  std::string source;

  /// Blind form omits `source`.
  nlohmann::json to_json(bool include_source = false) const;
};

/// Stable 16-hex-digit id derived from (source, record id).
std::string make_item_id(std::string_view source, std::string_view record_id);

/// One "original" item per distinct record id plus one item per prediction,
/// keyed by its model kind. Throws DataError on an unknown model kind.
std::vector<AnnotationItem> build_item_pool(std::span<const metrics::PredictionRecord> predictions);

/// Reads every predictions file and pools the items.
std::vector<AnnotationItem> load_item_pool(std::span<const std::filesystem::path> prediction_files);

/// ceil(fraction * n), at least 1 when n > 0.
std::size_t sample_size(std::size_t n, double fraction = kDefaultSampleFraction);

/// "0" -> 0, "5" -> 0.5, "1" -> 1; anything else is rejected.
std::optional<double> key_to_score(std::string_view key);

std::string utc_timestamp(std::chrono::system_clock::time_point t);
std::string utc_day(std::chrono::system_clock::time_point t);

// Append-only JSON-lines store; each line is written whole and fsynced.
// The effective score for an (item, annotator) pair is its latest line.
class ScoreStore {
 public:
  /// Loads existing lines; unparsable ones are counted and ignored.
  explicit ScoreStore(std::filesystem::path path);

  const std::filesystem::path& path() const { return path_; }

  /// Throws std::invalid_argument on an off-scale score or unknown source.
  void append(const metrics::AnnotationScore& score);

  std::vector<metrics::AnnotationScore> effective_scores() const;
  bool has_score(std::string_view item_id, std::string_view annotator) const;
  std::size_t line_count() const;
  std::size_t skipped_lines() const;

 private:
  using Key = std::pair<std::string, std::string>;  // (item_id, annotator)

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<Key, metrics::AnnotationScore> latest_;
  std::size_t lines_ = 0;
  std::size_t skipped_ = 0;
};

/// Overall and per-source metricF summaries over `scores`; coverage is
/// relative to the item counts in `pool`.
nlohmann::json summary_json(std::span<const AnnotationItem> pool, std::span<const metrics::AnnotationScore> scores);

/// Pool order shuffled with `seed`; items already scored by `annotator`
/// are dropped, then at most `limit` are returned.
std::vector<AnnotationItem> pending_items(std::span<const AnnotationItem> pool, const ScoreStore& store,
                                          std::string_view annotator, std::size_t limit, std::uint64_t seed);

struct TerminalOptions {
  std::string annotator;
  bool reveal = false;
  /// When set, only ceil(fraction * pool) items are ever presented.
  std::optional<double> sample_fraction;
  std::uint64_t seed = 0;
  std::chrono::system_clock::time_point (*now)() = &std::chrono::system_clock::now;
};

struct TerminalResult {
  std::size_t presented = 0;
  std::size_t recorded = 0;
  bool quit_early = false;
};

/// Interactive loop: shows each pending item, asks the prompt and records
/// 0/5/1 answers. "q" or end of input stops; other input re-prompts.
TerminalResult annotate_terminal(std::span<const AnnotationItem> pool, ScoreStore& store,
                                 const TerminalOptions& options, std::istream& in, std::ostream& out);

}  // namespace hashtag::annotation
