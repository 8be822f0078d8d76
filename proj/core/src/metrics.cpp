#include "hashtag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "hashtag/error.hpp"
#include "hashtag/text.hpp"
#include "hashtag/vocabulary.hpp"

namespace hashtag::metrics {

namespace {

std::map<Tokens, std::size_t> ngram_counts(const Tokens& tokens, std::size_t n) {
  std::map<Tokens, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[Tokens(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                    tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

double bleu(const Tokens& hypothesis, const Tokens& reference) {
  if (hypothesis.empty()) return 0.0;
  const std::size_t max_order = std::min<std::size_t>(4, hypothesis.size());
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_order; ++n) {
    const auto hyp = ngram_counts(hypothesis, n);
    const auto ref = ngram_counts(reference, n);
    std::size_t matched = 0;
    for (const auto& [gram, count] : hyp) {
      auto it = ref.find(gram);
      if (it != ref.end()) matched += std::min(count, it->second);
    }
    if (matched == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched) / static_cast<double>(hypothesis.size() - n + 1));
  }
  const double hyp_len = static_cast<double>(hypothesis.size());
  const double ref_len = static_cast<double>(reference.size());
  const double brevity = hyp_len < ref_len ? std::exp(1.0 - ref_len / hyp_len) : 1.0;
  return brevity * std::exp(log_sum / static_cast<double>(max_order));
}

NistInfo::NistInfo(std::span<const Tokens> references, std::size_t max_order) : max_order_(max_order) {
  for (const auto& ref : references) {
    total_unigrams_ += ref.size();
    for (std::size_t n = 1; n <= max_order_; ++n) {
      for (auto& [gram, count] : ngram_counts(ref, n)) counts_[gram] += count;
    }
  }
}

double NistInfo::info(const Tokens& ngram) const {
  if (ngram.empty()) return 0.0;
  auto it = counts_.find(ngram);
  if (it == counts_.end()) return 0.0;
  std::size_t prefix_count = total_unigrams_;
  if (ngram.size() > 1) {
    auto prefix = counts_.find(Tokens(ngram.begin(), ngram.end() - 1));
    prefix_count = prefix == counts_.end() ? 0 : prefix->second;
  }
  return std::log2(static_cast<double>(prefix_count) / static_cast<double>(it->second));
}

double nist(const Tokens& hypothesis, const Tokens& reference, const NistInfo& info) {
  if (hypothesis.empty() || reference.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t n = 1; n <= info.max_order(); ++n) {
    if (hypothesis.size() < n) break;
    const auto hyp = ngram_counts(hypothesis, n);
    const auto ref = ngram_counts(reference, n);
    double matched_info = 0.0;
    for (const auto& [gram, count] : hyp) {
      auto it = ref.find(gram);
      if (it != ref.end()) matched_info += static_cast<double>(std::min(count, it->second)) * info.info(gram);
    }
    total += matched_info / static_cast<double>(hypothesis.size() - n + 1);
  }
  const double ln15 = std::log(1.5);
  const double beta = std::log(0.5) / (ln15 * ln15);
  const double ratio = std::min(static_cast<double>(hypothesis.size()) / static_cast<double>(reference.size()), 1.0);
  const double lr = std::log(ratio);
  return total * std::exp(beta * lr * lr);
}

namespace {

// Depth-first search over exact-match alignments with the maximal number of
// matches, keeping the one with the fewest chunks.
class MeteorSearch {
 public:
  MeteorSearch(const Tokens& hyp, const Tokens& ref) : hyp_(hyp), ref_(ref), used_(ref.size(), false) {
    std::map<std::string, std::size_t> hyp_counts, ref_counts;
    for (const auto& t : hyp) ++hyp_counts[t];
    for (const auto& t : ref) ++ref_counts[t];
    for (const auto& [word, hc] : hyp_counts) {
      auto it = ref_counts.find(word);
      const std::size_t rc = it == ref_counts.end() ? 0 : it->second;
      matches_ += std::min(hc, rc);
      skip_budget_[word] = hc - std::min(hc, rc);
    }
  }

  std::size_t matches() const { return matches_; }

  std::size_t min_chunks() {
    if (matches_ == 0) return 0;
    best_ = std::numeric_limits<std::size_t>::max();
    visit(0, kNone, 0);
    return best_;
  }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  // Expansion cap; beyond it the best alignment found so far is kept.
  static constexpr std::size_t kMaxExpansions = 2'000'000;

  void visit(std::size_t i, std::size_t prev_ref, std::size_t chunks) {
    if (chunks >= best_ || expansions_ >= kMaxExpansions) return;
    ++expansions_;
    if (i == hyp_.size()) {
      best_ = chunks;
      return;
    }
    const std::string& word = hyp_[i];
    // Prefer the continuation of the current chunk, then other positions.
    if (prev_ref != kNone && prev_ref + 1 < ref_.size() && !used_[prev_ref + 1] && ref_[prev_ref + 1] == word) {
      used_[prev_ref + 1] = true;
      visit(i + 1, prev_ref + 1, chunks);
      used_[prev_ref + 1] = false;
    }
    for (std::size_t j = 0; j < ref_.size(); ++j) {
      if (used_[j] || ref_[j] != word) continue;
      if (prev_ref != kNone && j == prev_ref + 1) continue;  // handled above
      used_[j] = true;
      visit(i + 1, j, chunks + 1);
      used_[j] = false;
    }
    auto budget = skip_budget_.find(word);
    if (budget != skip_budget_.end() && budget->second > 0) {
      --budget->second;
      visit(i + 1, kNone, chunks);
      ++budget->second;
    }
  }

  const Tokens& hyp_;
  const Tokens& ref_;
  std::vector<bool> used_;
  std::map<std::string, std::size_t> skip_budget_;
  std::size_t matches_ = 0;
  std::size_t best_ = 0;
  std::size_t expansions_ = 0;
};

}  // namespace

MeteorAlignment meteor_alignment(const Tokens& hypothesis, const Tokens& reference) {
  MeteorAlignment a;
  if (hypothesis.empty() || reference.empty()) return a;
  MeteorSearch search(hypothesis, reference);
  a.matches = search.matches();
  if (a.matches == 0) return a;
  a.chunks = search.min_chunks();
  const double m = static_cast<double>(a.matches);
  a.precision = m / static_cast<double>(hypothesis.size());
  a.recall = m / static_cast<double>(reference.size());
  a.fmean = 10.0 * a.precision * a.recall / (a.recall + 9.0 * a.precision);
  const double frag = static_cast<double>(a.chunks) / m;
  a.penalty = 0.5 * frag * frag * frag;
  a.score = a.fmean * (1.0 - a.penalty);
  return a;
}

double meteor(const Tokens& hypothesis, const Tokens& reference) {
  return meteor_alignment(hypothesis, reference).score;
}

// ---------------------------------------------------------------------------

std::optional<double> cv_percent(double mean, double sd) {
  if (mean == 0.0) return std::nullopt;
  return 100.0 * sd / mean;
}

Descriptive descriptive_stats(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("descriptive_stats: empty input");
  Descriptive d;
  d.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  d.mean = sum / static_cast<double>(d.count);
  if (d.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - d.mean) * (v - d.mean);
    d.sd = std::sqrt(ss / static_cast<double>(d.count - 1));
  }
  d.cv_percent = cv_percent(d.mean, d.sd);
  return d;
}

Normalized min_max_normalize(std::span<const double> values) {
  Normalized out;
  out.values.assign(values.size(), 0.0);
  if (values.empty()) {
    out.degenerate = true;
    return out;
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  if (range == 0.0) {
    out.degenerate = true;
    return out;
  }
  for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = (values[i] - *lo) / range;
  return out;
}

std::string format_mean_sd(double mean, double sd, int decimals) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.*f \xC2\xB1 %.*f", decimals, mean, decimals, sd);
  return buf;
}

// ---------------------------------------------------------------------------

nlohmann::json PredictionRecord::to_json() const {
  return {{"id", id},
          {"review_text", review_text},
          {"original_title", original_title},
          {"predicted_title", predicted_title},
          {"model_kind", model_kind}};
}

PredictionRecord PredictionRecord::from_json(const nlohmann::json& doc) {
  try {
    return PredictionRecord{doc.at("id").get<std::string>(), doc.at("review_text").get<std::string>(),
                            doc.at("original_title").get<std::string>(), doc.at("predicted_title").get<std::string>(),
                            doc.at("model_kind").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad prediction record: ") + e.what());
  }
}

PredictionFile read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open predictions file: " + path.string());
  PredictionFile file;
  std::set<std::string> seen;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto rec = PredictionRecord::from_json(nlohmann::json::parse(line));
      if (!seen.insert(rec.id).second) {
        ++file.skipped_lines;
        continue;
      }
      file.records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception&) {
      ++file.skipped_lines;
    } catch (const DataError&) {
      ++file.skipped_lines;
    }
  }
  return file;
}

CreativityStats creativity_stats(std::span<const PredictionRecord> predictions) {
  CreativityStats s;
  std::set<std::string> unique;
  std::set<std::string> predicted_vocab;
  std::set<std::string> original_vocab;
  for (const auto& p : predictions) {
    unique.insert(p.predicted_title);
    for (auto& t : split_tokens(p.predicted_title)) predicted_vocab.insert(std::move(t));
    for (auto& t : split_tokens(p.original_title)) original_vocab.insert(std::move(t));
  }
  s.unique_predictions = unique.size();
  s.original_vocab_size = original_vocab.size();
  for (const auto& t : predicted_vocab) {
    if (original_vocab.contains(t)) ++s.vocab_used_count;
  }
  s.vocab_used_percent = original_vocab.empty()
                             ? 0.0
                             : 100.0 * static_cast<double>(s.vocab_used_count) /
                                   static_cast<double>(original_vocab.size());
  return s;
}

std::vector<WordCount> word_frequencies(std::span<const std::string> texts, std::size_t top_k) {
  std::map<std::string, std::size_t> counts;
  for (const auto& text : texts) {
    for (auto& tok : split_tokens(text)) {
      if (is_punctuation_token(tok)) continue;
      if (std::find(special::kNames.begin(), special::kNames.end(), tok) != special::kNames.end()) continue;
      ++counts[std::move(tok)];
    }
  }
  std::vector<WordCount> out;
  out.reserve(counts.size());
  for (auto& [tok, c] : counts) out.push_back({tok, c});
  std::stable_sort(out.begin(), out.end(), [](const WordCount& a, const WordCount& b) { return a.count > b.count; });
  if (out.size() > top_k) out.resize(top_k);
  return out;
}

nlohmann::json to_json(const Descriptive& d) {
  nlohmann::json j{{"count", d.count}, {"mean", d.mean}, {"sd", d.sd}};
  j["cv_percent"] = d.cv_percent ? nlohmann::json(*d.cv_percent) : nlohmann::json(nullptr);
  char cv[32] = "n/a";
  if (d.cv_percent) std::snprintf(cv, sizeof(cv), "%.2f", *d.cv_percent);
  j["display"] = format_mean_sd(d.mean, d.sd) + " (%CV " + cv + ")";
  return j;
}

nlohmann::json length_and_creativity_json(std::span<const PredictionRecord> predictions) {
  if (predictions.empty()) throw DataError("no predictions to summarize");
  std::vector<double> orig, pred;
  for (const auto& p : predictions) {
    orig.push_back(static_cast<double>(split_tokens(p.original_title).size()));
    pred.push_back(static_cast<double>(split_tokens(p.predicted_title).size()));
  }
  const auto c = creativity_stats(predictions);
  return {{"lengths", {{"original", to_json(descriptive_stats(orig))}, {"predicted", to_json(descriptive_stats(pred))}}},
          {"creativity",
           {{"unique_predictions", c.unique_predictions},
            {"vocab_used_count", c.vocab_used_count},
            {"original_vocab_size", c.original_vocab_size},
            {"vocab_used_percent", c.vocab_used_percent}}}};
}

MetricReport evaluate_predictions(std::span<const PredictionRecord> predictions,
                                  std::optional<std::span<const Tokens>> info_corpus) {
  if (predictions.empty()) throw DataError("no predictions to evaluate");
  std::vector<Tokens> hyps, refs;
  hyps.reserve(predictions.size());
  refs.reserve(predictions.size());
  for (const auto& p : predictions) {
    hyps.push_back(split_tokens(p.predicted_title));
    refs.push_back(split_tokens(p.original_title));
  }
  const NistInfo info(info_corpus ? *info_corpus : std::span<const Tokens>(refs));

  MetricReport report;
  report.rows = predictions.size();
  auto& b = report.metrics["bleu"];
  auto& n = report.metrics["nist"];
  auto& m = report.metrics["meteor"];
  std::vector<double> orig_len, pred_len;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    b.scores.push_back(bleu(hyps[i], refs[i]));
    n.scores.push_back(nist(hyps[i], refs[i], info));
    m.scores.push_back(meteor(hyps[i], refs[i]));
    orig_len.push_back(static_cast<double>(refs[i].size()));
    pred_len.push_back(static_cast<double>(hyps[i].size()));
  }
  for (auto& [name, summary] : report.metrics) {
    summary.stats = descriptive_stats(summary.scores);
    const auto norm = min_max_normalize(summary.scores);
    summary.normalization_degenerate = norm.degenerate;
    summary.normalized_mean = descriptive_stats(norm.values).mean;
  }
  report.creativity = creativity_stats(predictions);
  report.lengths.original = descriptive_stats(orig_len);
  report.lengths.predicted = descriptive_stats(pred_len);
  return report;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["rows"] = rows;
  j["skipped_lines"] = skipped_lines;
  nlohmann::json ms = nlohmann::json::object();
  nlohmann::json normalized = nlohmann::json::object();
  for (const auto& [name, s] : metrics) {
    auto entry = metrics::to_json(s.stats);
    entry["normalized_mean"] = s.normalized_mean;
    entry["normalization_degenerate"] = s.normalization_degenerate;
    entry["scores"] = s.scores;
    ms[name] = std::move(entry);
    normalized[name] = s.normalized_mean;
  }
  j["metrics"] = std::move(ms);
  j["normalized_means"] = std::move(normalized);
  j["creativity"] = {{"unique_predictions", creativity.unique_predictions},
                     {"vocab_used_count", creativity.vocab_used_count},
                     {"original_vocab_size", creativity.original_vocab_size},
                     {"vocab_used_percent", creativity.vocab_used_percent}};
  j["lengths"] = {{"original", metrics::to_json(lengths.original)}, {"predicted", metrics::to_json(lengths.predicted)}};
  return j;
}

MetricReport evaluate_file(const std::filesystem::path& predictions,
                           const std::optional<std::filesystem::path>& info_corpus) {
  auto file = read_predictions(predictions);
  if (file.records.empty()) throw DataError("predictions file has no valid rows: " + predictions.string());
  std::optional<std::vector<Tokens>> corpus;
  if (info_corpus) {
    std::ifstream in(*info_corpus, std::ios::binary);
    if (!in) throw DataError("cannot open info corpus: " + info_corpus->string());
    corpus.emplace();
    std::string line;
    while (std::getline(in, line)) {
      auto toks = split_tokens(line);
      if (!toks.empty()) corpus->push_back(std::move(toks));
    }
  }
  auto report = corpus ? evaluate_predictions(file.records, std::span<const Tokens>(*corpus))
                       : evaluate_predictions(file.records);
  report.skipped_lines = file.skipped_lines;
  return report;
}

// ---------------------------------------------------------------------------

bool is_valid_source(std::string_view source) {
  return source == "original" || source == "bilstm" || source == "maskedlm";
}

bool is_valid_metricf_score(double score) { return score == 0.0 || score == 0.5 || score == 1.0; }

nlohmann::json AnnotationScore::to_json() const {
  return {{"item_id", item_id}, {"source", source}, {"score", score}, {"annotator", annotator}, {"timestamp", timestamp}};
}

AnnotationScore AnnotationScore::from_json(const nlohmann::json& doc) {
  AnnotationScore s;
  try {
    s.item_id = doc.at("item_id").get<std::string>();
    s.source = doc.at("source").get<std::string>();
    s.score = doc.at("score").get<double>();
    s.annotator = doc.at("annotator").get<std::string>();
    s.timestamp = doc.value("timestamp", std::string{});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad annotation score: ") + e.what());
  }
  if (!is_valid_metricf_score(s.score)) throw DataError("annotation score must be 0, 0.5 or 1");
  if (!is_valid_source(s.source)) throw DataError("unknown annotation source '" + s.source + "'");
  return s;
}

nlohmann::json MetricFSummary::to_json() const {
  nlohmann::json j{{"count", count}, {"coverage_percent", coverage_percent}, {"meets_sample_target", meets_sample_target}};
  j["mean"] = mean ? nlohmann::json(*mean) : nlohmann::json(nullptr);
  j["sd"] = sd ? nlohmann::json(*sd) : nlohmann::json(nullptr);
  j["display"] = mean ? nlohmann::json(format_mean_sd(*mean, *sd)) : nlohmann::json(nullptr);
  return j;
}

MetricFSummary metricf_aggregate(std::span<const AnnotationScore> scores, std::optional<std::string_view> source,
                                 std::size_t total_items) {
  std::vector<double> values;
  for (const auto& s : scores) {
    if (!is_valid_metricf_score(s.score)) throw std::invalid_argument("metricF score off the 0/0.5/1 scale");
    if (source && s.source != *source) continue;
    values.push_back(s.score);
  }
  MetricFSummary out;
  out.count = values.size();
  if (!values.empty()) {
    const auto d = descriptive_stats(values);
    out.mean = d.mean;
    out.sd = d.sd;
  }
  out.coverage_percent =
      total_items == 0 ? 0.0 : 100.0 * static_cast<double>(out.count) / static_cast<double>(total_items);
  out.meets_sample_target = out.coverage_percent >= kMetricFSampleTargetPercent;
  return out;
}

}  // namespace hashtag::metrics
