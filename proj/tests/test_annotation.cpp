#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hashtag/annotation.hpp"
#include "hashtag/error.hpp"
#include "support.hpp"

namespace hashtag {
namespace {

using namespace annotation;
using metrics::AnnotationScore;
using metrics::PredictionRecord;

std::chrono::system_clock::time_point fixed_now() {
  return std::chrono::system_clock::time_point(std::chrono::seconds(1767225600));  // 2026-01-01T00:00:00Z
}

std::vector<PredictionRecord> predictions(std::size_t n, const std::string& kind) {
  std::vector<PredictionRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({"r" + std::to_string(i), "texto da avaliacao " + std::to_string(i), "titulo original",
                   kind + " titulo", kind});
  }
  return out;
}

TEST(ItemPool, OriginalsDeduplicatedAndIdsStable) {
  auto preds = predictions(4, "bilstm");
  const auto more = predictions(4, "maskedlm");
  preds.insert(preds.end(), more.begin(), more.end());
  const auto pool = build_item_pool(preds);
  EXPECT_EQ(pool.size(), 12u);
  std::set<std::string> ids;
  std::map<std::string, int> per_source;
  for (const auto& item : pool) {
    ids.insert(item.item_id);
    ++per_source[item.source];
  }
  EXPECT_EQ(per_source["original"], 4);
  EXPECT_EQ(per_source["bilstm"], 4);
  EXPECT_EQ(per_source["maskedlm"], 4);
  EXPECT_EQ(pool.front().item_id, make_item_id(pool.front().source, "r0"));
  EXPECT_EQ(ids.size(), 12u);
  EXPECT_EQ(make_item_id("bilstm", "r1"), make_item_id("bilstm", "r1"));
  EXPECT_NE(make_item_id("bilstm", "r1"), make_item_id("maskedlm", "r1"));
  EXPECT_EQ(make_item_id("bilstm", "r1").size(), 16u);

  auto bad = predictions(1, "gpt");
  EXPECT_THROW(build_item_pool(bad), DataError);
}

TEST(ItemPool, BlindJsonHasNoSource) {
  const AnnotationItem item{"id", "review", "title", "bilstm"};
  EXPECT_FALSE(item.to_json().contains("source"));
  EXPECT_EQ(item.to_json(true)["source"], "bilstm");
}

TEST(Sampling, SixPercentRoundsUp) {
  EXPECT_EQ(sample_size(100), 6u);
  EXPECT_EQ(sample_size(101), 7u);
  EXPECT_EQ(sample_size(50), 3u);
  EXPECT_EQ(sample_size(10), 1u);
  EXPECT_EQ(sample_size(1), 1u);
  EXPECT_EQ(sample_size(0), 0u);
  for (std::size_t n = 1; n < 2000; ++n) {
    EXPECT_EQ(sample_size(n), static_cast<std::size_t>(std::ceil(0.06 * static_cast<double>(n) - 1e-9))) << n;
  }
}

TEST(Keys, ThreePointScale) {
  EXPECT_EQ(key_to_score("0"), 0.0);
  EXPECT_EQ(key_to_score("5"), 0.5);
  EXPECT_EQ(key_to_score("1"), 1.0);
  for (const char* bad : {"", "2", "0.5", "10", "x", "7"}) EXPECT_FALSE(key_to_score(bad)) << bad;
}

TEST(Timestamps, Utc) {
  EXPECT_EQ(utc_timestamp(fixed_now()), "2026-01-01T00:00:00Z");
  EXPECT_EQ(utc_day(fixed_now()), "2026-01-01");
}

TEST(ScoreStore, AppendReloadAndLastWriteWins) {
  testing::TempDir dir;
  const auto path = dir / "scores.jsonl";
  {
    ScoreStore store(path);
    store.append({"a", "bilstm", 1.0, "ann", "t1"});
    store.append({"b", "bilstm", 0.5, "ann", "t2"});
    store.append({"a", "bilstm", 0.0, "ann", "t3"});
    store.append({"a", "bilstm", 1.0, "other", "t4"});
    EXPECT_THROW(store.append({"c", "bilstm", 0.7, "ann", "t5"}), std::invalid_argument);
    EXPECT_EQ(store.line_count(), 4u);
  }
  EXPECT_EQ(testing::read_lines(path).size(), 4u);
  // A torn final line (crash mid-write elsewhere) is ignored on reload.
  testing::write_file(path, testing::read_file(path) + "{\"item_id\": \"z\", \"sco");
  ScoreStore reloaded(path);
  EXPECT_EQ(reloaded.skipped_lines(), 1u);
  const auto scores = reloaded.effective_scores();
  ASSERT_EQ(scores.size(), 3u);
  EXPECT_TRUE(reloaded.has_score("a", "ann"));
  EXPECT_FALSE(reloaded.has_score("c", "ann"));
  for (const auto& s : scores) {
    if (s.item_id == "a" && s.annotator == "ann") EXPECT_EQ(s.score, 0.0);
  }
}

TEST(Summary, PerSourceAggregates) {
  const auto pool = build_item_pool(predictions(10, "bilstm"));
  const std::vector<AnnotationScore> none;
  const auto empty = summary_json(pool, none);
  EXPECT_EQ(empty["total_items"], 20);
  EXPECT_EQ(empty["overall"]["count"], 0);
  EXPECT_TRUE(empty["overall"]["mean"].is_null());
  EXPECT_EQ(empty["sources"]["maskedlm"]["count"], 0);

  std::vector<AnnotationScore> scores;
  double values[] = {0.0, 0.5, 1.0};
  int k = 0;
  for (const auto& item : pool) {
    if (item.source != "bilstm") continue;
    scores.push_back({item.item_id, item.source, values[k], "ann", "t"});
    if (++k == 3) break;
  }
  const auto s = summary_json(pool, scores);
  EXPECT_DOUBLE_EQ(s["sources"]["bilstm"]["mean"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(s["sources"]["bilstm"]["sd"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(s["sources"]["bilstm"]["coverage_percent"].get<double>(), 30.0);
  EXPECT_TRUE(s["sources"]["bilstm"]["meets_sample_target"].get<bool>());
  EXPECT_EQ(s["overall"]["count"], 3);
  EXPECT_DOUBLE_EQ(s["overall"]["coverage_percent"].get<double>(), 15.0);
}

struct Session {
  std::string output;
  TerminalResult result;
};

Session run_terminal(std::span<const AnnotationItem> pool, ScoreStore& store, const std::string& input,
                     std::optional<double> fraction = std::nullopt, bool reveal = false) {
  TerminalOptions opts;
  opts.annotator = "ann";
  opts.sample_fraction = fraction;
  opts.seed = 3;
  opts.reveal = reveal;
  opts.now = &fixed_now;
  std::istringstream in(input);
  std::ostringstream out;
  Session s;
  s.result = annotate_terminal(pool, store, opts, in, out);
  s.output = out.str();
  return s;
}

TEST(Terminal, ScoresThreeItemsWithPromptAndBlinding) {
  testing::TempDir dir;
  const auto all = build_item_pool(predictions(3, "bilstm"));
  std::vector<AnnotationItem> pool;
  for (const auto& i : all) {
    if (i.source == "bilstm") pool.push_back(i);
  }
  ScoreStore store(dir / "s.jsonl");
  const auto s = run_terminal(pool, store, "1\n5\n0\n");
  EXPECT_EQ(s.result.presented, 3u);
  EXPECT_EQ(s.result.recorded, 3u);
  EXPECT_FALSE(s.result.quit_early);
  EXPECT_NE(s.output.find("Does this sentence look like a good or bad Ecommerce product page hashtag?"),
            std::string::npos);
  EXPECT_EQ(s.output.find("Source:"), std::string::npos);
  EXPECT_EQ(testing::read_lines(dir / "s.jsonl").size(), 3u);
  const auto scores = store.effective_scores();
  const auto summary = metrics::metricf_aggregate(scores, std::nullopt, pool.size());
  EXPECT_DOUBLE_EQ(*summary.mean, 0.5);
  for (const auto& line : testing::read_lines(dir / "s.jsonl")) {
    EXPECT_EQ(nlohmann::json::parse(line)["timestamp"], "2026-01-01T00:00:00Z");
  }

  ScoreStore reveal_store(dir / "r.jsonl");
  EXPECT_NE(run_terminal(pool, reveal_store, "q\n", std::nullopt, true).output.find("Source:    bilstm"),
            std::string::npos);
}

TEST(Terminal, InvalidKeysRepromptWithoutRecording) {
  testing::TempDir dir;
  const auto pool = build_item_pool(predictions(1, "maskedlm"));
  ScoreStore store(dir / "s.jsonl");
  const auto s = run_terminal(pool, store, "7\n0.5\n\n 5 \n1\n");
  EXPECT_EQ(s.result.recorded, 2u);
  std::size_t reprompts = 0;
  for (auto pos = s.output.find("please answer"); pos != std::string::npos; pos = s.output.find("please answer", pos + 1)) {
    ++reprompts;
  }
  EXPECT_EQ(reprompts, 3u);
  std::set<double> values;
  for (const auto& sc : store.effective_scores()) values.insert(sc.score);
  EXPECT_EQ(values, (std::set<double>{0.5, 1.0}));
}

TEST(Terminal, ResumeSkipsScoredItems) {
  testing::TempDir dir;
  const auto pool = build_item_pool(predictions(5, "bilstm"));  // 10 items
  {
    ScoreStore store(dir / "s.jsonl");
    const auto first = run_terminal(pool, store, "1\n0\nq\n");
    EXPECT_TRUE(first.result.quit_early);
    EXPECT_EQ(first.result.recorded, 2u);
  }
  {
    // End of input behaves like an interrupt; the store stays valid.
    ScoreStore store(dir / "s.jsonl");
    const auto second = run_terminal(pool, store, "5\n");
    EXPECT_EQ(second.result.presented, 2u);
    EXPECT_TRUE(second.result.quit_early);
  }
  ScoreStore store(dir / "s.jsonl");
  EXPECT_EQ(store.skipped_lines(), 0u);
  const auto rest = run_terminal(pool, store, "1\n1\n1\n1\n1\n1\n1\n1\n");
  EXPECT_EQ(rest.result.recorded, 7u);
  const auto lines = testing::read_lines(dir / "s.jsonl");
  std::set<std::string> ids;
  for (const auto& l : lines) ids.insert(nlohmann::json::parse(l)["item_id"].get<std::string>());
  EXPECT_EQ(lines.size(), 10u);
  EXPECT_EQ(ids.size(), 10u);
}

TEST(Terminal, SampleFractionPresentsCeilingOfSixPercent) {
  testing::TempDir dir;
  const auto pool = build_item_pool(predictions(50, "bilstm"));  // 100 items
  ScoreStore store(dir / "s.jsonl");
  std::string input;
  for (int i = 0; i < 100; ++i) input += "1\n";
  const auto s = run_terminal(pool, store, input, 0.06);
  EXPECT_EQ(s.result.presented, 6u);
  EXPECT_EQ(s.result.recorded, 6u);
  // Same seed: the resumed session has nothing left in its sample.
  const auto again = run_terminal(pool, store, input, 0.06);
  EXPECT_EQ(again.result.presented, 0u);
}

}  // namespace
}  // namespace hashtag
