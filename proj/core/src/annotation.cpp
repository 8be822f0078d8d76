#include "hashtag/annotation.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>
#include <system_error>

#include "hashtag/error.hpp"
#include "hashtag/rng.hpp"

namespace hashtag::annotation {

using metrics::AnnotationScore;

nlohmann::json AnnotationItem::to_json(bool include_source) const {
  nlohmann::json j{{"item_id", item_id}, {"review_text", review_text}, {"candidate_title", candidate_title}};
  if (include_source) j["source"] = source;
  return j;
}

std::string make_item_id(std::string_view source, std::string_view record_id) {
  std::uint64_t h = fnv1a64(source);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(record_id, h);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<AnnotationItem> build_item_pool(std::span<const metrics::PredictionRecord> predictions) {
  std::vector<AnnotationItem> pool;
  std::set<std::string> ids;
  auto push = [&](std::string source, const metrics::PredictionRecord& p, const std::string& title) {
    auto id = make_item_id(source, p.id);
    if (!ids.insert(id).second) return;
    pool.push_back({std::move(id), p.review_text, title, std::move(source)});
  };
  for (const auto& p : predictions) {
    if (!metrics::is_valid_source(p.model_kind) || p.model_kind == "original") {
      throw DataError("unknown model kind '" + p.model_kind + "' for record " + p.id);
    }
    push("original", p, p.original_title);
    push(p.model_kind, p, p.predicted_title);
  }
  return pool;
}

std::vector<AnnotationItem> load_item_pool(std::span<const std::filesystem::path> prediction_files) {
  std::vector<metrics::PredictionRecord> all;
  for (const auto& f : prediction_files) {
    auto file = metrics::read_predictions(f);
    all.insert(all.end(), file.records.begin(), file.records.end());
  }
  if (all.empty()) throw DataError("no predictions to annotate");
  return build_item_pool(all);
}

std::size_t sample_size(std::size_t n, double fraction) {
  if (fraction <= 0.0 || fraction > 1.0) throw std::invalid_argument("sample fraction must be in (0, 1]");
  if (n == 0) return 0;
  // Small slack keeps exact products such as 0.06 * 50 = 3 from rounding up.
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

std::optional<double> key_to_score(std::string_view key) {
  if (key == "0") return 0.0;
  if (key == "5") return 0.5;
  if (key == "1") return 1.0;
  return std::nullopt;
}

namespace {

std::tm utc_tm(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  return tm;
}

}  // namespace

std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::tm tm = utc_tm(t);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string utc_day(std::chrono::system_clock::time_point t) {
  const std::tm tm = utc_tm(t);
  char buf[16];
  std::strftime(buf, sizeof(buf), "%Y-%m-%d", &tm);
  return buf;
}

// ---------------------------------------------------------------------------

ScoreStore::ScoreStore(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto s = AnnotationScore::from_json(nlohmann::json::parse(line));
      latest_[{s.item_id, s.annotator}] = std::move(s);
      ++lines_;
    } catch (const std::exception&) {
      ++skipped_;
    }
  }
}

void ScoreStore::append(const AnnotationScore& score) {
  if (!metrics::is_valid_metricf_score(score.score)) throw std::invalid_argument("score must be 0, 0.5 or 1");
  if (!metrics::is_valid_source(score.source)) throw std::invalid_argument("unknown source '" + score.source + "'");
  if (score.annotator.empty()) throw std::invalid_argument("annotator id is empty");
  const std::string line = score.to_json().dump() + "\n";

  std::lock_guard lock(mutex_);
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw std::system_error(errno, std::generic_category(), "open " + path_.string());
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw std::system_error(err, std::generic_category(), "write " + path_.string());
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    const int err = errno;
    ::close(fd);
    throw std::system_error(err, std::generic_category(), "fsync " + path_.string());
  }
  ::close(fd);
  latest_[{score.item_id, score.annotator}] = score;
  ++lines_;
}

std::vector<AnnotationScore> ScoreStore::effective_scores() const {
  std::lock_guard lock(mutex_);
  std::vector<AnnotationScore> out;
  out.reserve(latest_.size());
  for (const auto& [key, s] : latest_) out.push_back(s);
  return out;
}

bool ScoreStore::has_score(std::string_view item_id, std::string_view annotator) const {
  std::lock_guard lock(mutex_);
  return latest_.contains({std::string(item_id), std::string(annotator)});
}

std::size_t ScoreStore::line_count() const {
  std::lock_guard lock(mutex_);
  return lines_;
}

std::size_t ScoreStore::skipped_lines() const {
  std::lock_guard lock(mutex_);
  return skipped_;
}

// ---------------------------------------------------------------------------

nlohmann::json summary_json(std::span<const AnnotationItem> pool, std::span<const AnnotationScore> scores) {
  std::map<std::string, std::size_t> totals{{"original", 0}, {"bilstm", 0}, {"maskedlm", 0}};
  for (const auto& item : pool) ++totals[item.source];
  nlohmann::json j;
  j["total_items"] = pool.size();
  j["sample_target_percent"] = metrics::kMetricFSampleTargetPercent;
  j["overall"] = metrics::metricf_aggregate(scores, std::nullopt, pool.size()).to_json();
  nlohmann::json sources = nlohmann::json::object();
  for (const auto& [source, total] : totals) {
    auto entry = metrics::metricf_aggregate(scores, source, total).to_json();
    entry["total_items"] = total;
    sources[source] = std::move(entry);
  }
  j["sources"] = std::move(sources);
  return j;
}

std::vector<AnnotationItem> pending_items(std::span<const AnnotationItem> pool, const ScoreStore& store,
                                          std::string_view annotator, std::size_t limit, std::uint64_t seed) {
  std::vector<AnnotationItem> order(pool.begin(), pool.end());
  Rng rng(seed);
  rng.shuffle(std::span<AnnotationItem>(order));
  std::vector<AnnotationItem> out;
  for (auto& item : order) {
    if (out.size() >= limit) break;
    if (!store.has_score(item.item_id, annotator)) out.push_back(std::move(item));
  }
  return out;
}

TerminalResult annotate_terminal(std::span<const AnnotationItem> pool, ScoreStore& store,
                                 const TerminalOptions& options, std::istream& in, std::ostream& out) {
  if (options.annotator.empty()) throw std::invalid_argument("annotator id is required");
  // The sample is fixed by the seed so a resumed session sees the same subset.
  const std::size_t cap = options.sample_fraction ? sample_size(pool.size(), *options.sample_fraction) : pool.size();
  std::vector<AnnotationItem> order(pool.begin(), pool.end());
  Rng rng(options.seed);
  rng.shuffle(std::span<AnnotationItem>(order));
  order.resize(std::min(cap, order.size()));

  std::vector<const AnnotationItem*> todo;
  for (const auto& item : order) {
    if (!store.has_score(item.item_id, options.annotator)) todo.push_back(&item);
  }

  TerminalResult result;
  out << todo.size() << " item(s) to score (" << order.size() - todo.size() << " already done).\n";
  for (std::size_t k = 0; k < todo.size(); ++k) {
    const AnnotationItem& item = *todo[k];
    ++result.presented;
    out << "\n[" << k + 1 << "/" << todo.size() << "]\n";
    out << "Review:    " << item.review_text << "\n";
    out << "Candidate: " << item.candidate_title << "\n";
    if (options.reveal) out << "Source:    " << item.source << "\n";
    out << kPrompt << "\n";

    std::optional<double> score;
    std::string line;
    while (!score) {
      out << "  [0] bad  [5] average  [1] good  [q] quit > " << std::flush;
      if (!std::getline(in, line)) {
        result.quit_early = true;
        out << "\n";
        return result;
      }
      const auto first = line.find_first_not_of(" \t\r");
      const auto last = line.find_last_not_of(" \t\r");
      const std::string key = first == std::string::npos ? "" : line.substr(first, last - first + 1);
      if (key == "q") {
        result.quit_early = true;
        return result;
      }
      score = key_to_score(key);
      if (!score) out << "  please answer 0, 5 or 1\n";
    }
    store.append(AnnotationScore{item.item_id, item.source, *score, options.annotator, utc_timestamp(options.now())});
    ++result.recorded;
  }
  return result;
}

}  // namespace hashtag::annotation
