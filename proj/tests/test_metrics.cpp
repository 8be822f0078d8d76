#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "hashtag/error.hpp"
#include "hashtag/metrics.hpp"
#include "hashtag/rng.hpp"
#include "hashtag/text.hpp"
#include "support.hpp"

namespace hashtag {
namespace {

using namespace metrics;

Tokens toks(std::string_view s) { return split_tokens(s); }

struct FixtureCase {
  std::string hypothesis, reference;
  double bleu, nist, meteor;
};

std::vector<FixtureCase> load_fixture() {
  const auto doc = nlohmann::json::parse(testing::read_file(testing::fixture_dir() / "metric_fixture.json"));
  std::vector<FixtureCase> out;
  for (const auto& c : doc.at("cases")) {
    out.push_back({c.at("hypothesis"), c.at("reference"), c.at("bleu"), c.at("nist"), c.at("meteor")});
  }
  return out;
}

NistInfo fixture_info(const std::vector<FixtureCase>& cases) {
  std::vector<Tokens> refs;
  for (const auto& c : cases) refs.push_back(toks(c.reference));
  return NistInfo(refs);
}

TEST(MetricOracle, FixtureMatchesBruteForce) {
  const auto cases = load_fixture();
  ASSERT_EQ(cases.size(), 10u);
  const auto info = fixture_info(cases);
  for (const auto& c : cases) {
    SCOPED_TRACE(c.hypothesis + " | " + c.reference);
    EXPECT_NEAR(bleu(toks(c.hypothesis), toks(c.reference)), c.bleu, 1e-9);
    EXPECT_NEAR(nist(toks(c.hypothesis), toks(c.reference), info), c.nist, 1e-9);
    EXPECT_NEAR(meteor(toks(c.hypothesis), toks(c.reference)), c.meteor, 1e-9);
  }
}

TEST(Bleu, Examples) {
  EXPECT_DOUBLE_EQ(bleu(toks("produto muito bom"), toks("produto muito bom")), 1.0);
  EXPECT_EQ(bleu(toks("produto muito bom"), toks("produto bom")), 0.0);
  EXPECT_DOUBLE_EQ(bleu(toks("bom"), toks("bom")), 1.0);
  EXPECT_EQ(bleu({}, toks("bom")), 0.0);
  // Order capped at 2, both precisions 1, brevity exp(1 - 3/2).
  EXPECT_NEAR(bleu(toks("muito bom"), toks("produto muito bom")), std::exp(-0.5), 1e-15);
}

TEST(Nist, HandBuiltInfoTable) {
  // Corpus "a b", "a c", "b": unigrams a=2 b=2 c=1 (total 5), bigrams "a b"=1 "a c"=1.
  const std::vector<Tokens> corpus = {toks("a b"), toks("a c"), toks("b")};
  const NistInfo info(corpus);
  EXPECT_EQ(info.total_unigrams(), 5u);
  EXPECT_NEAR(info.info(toks("a")), std::log2(5.0 / 2.0), 1e-15);
  EXPECT_NEAR(info.info(toks("c")), std::log2(5.0), 1e-15);
  EXPECT_NEAR(info.info(toks("a b")), 1.0, 1e-15);
  EXPECT_EQ(info.info(toks("c a")), 0.0);

  // Identity: unigram term log2(2.5), bigram term 1.
  EXPECT_NEAR(nist(toks("a b"), toks("a b"), info), std::log2(5.0), 1e-12);
  // One of two unigrams matched, no bigram.
  EXPECT_NEAR(nist(toks("a c"), toks("a b"), info), std::log2(2.5) / 2.0, 1e-12);
  // Half-length hypothesis: brevity factor exp(beta ln^2 0.5).
  const double beta = std::log(0.5) / std::pow(std::log(1.5), 2);
  EXPECT_NEAR(nist(toks("a"), toks("a b"), info), std::log2(2.5) * std::exp(beta * std::pow(std::log(0.5), 2)),
              1e-12);
  EXPECT_EQ(nist(toks("x y"), toks("a b"), info), 0.0);
  EXPECT_EQ(nist({}, toks("a b"), info), 0.0);
}

TEST(Meteor, Examples) {
  EXPECT_NEAR(meteor(toks("a b c"), toks("a b c")), 53.0 / 54.0, 1e-15);
  EXPECT_NEAR(meteor(toks("a b c"), toks("a b c")), 0.98148, 1e-5);
  const auto swapped = meteor_alignment(toks("b a"), toks("a b"));
  EXPECT_EQ(swapped.matches, 2u);
  EXPECT_EQ(swapped.chunks, 2u);
  EXPECT_DOUBLE_EQ(swapped.fmean, 1.0);
  EXPECT_DOUBLE_EQ(swapped.penalty, 0.5);
  EXPECT_DOUBLE_EQ(swapped.score, 0.5);
  EXPECT_EQ(meteor(toks("x y"), toks("a b")), 0.0);
  EXPECT_EQ(meteor({}, toks("a")), 0.0);
  EXPECT_EQ(meteor(toks("a"), {}), 0.0);
}

TEST(Meteor, PrefersFewerChunksAmongMaximalAlignments) {
  // "a" can align to either reference copy; the choice next to "b" keeps one chunk.
  const auto r = meteor_alignment(toks("a b"), toks("a x a b"));
  EXPECT_EQ(r.matches, 2u);
  EXPECT_EQ(r.chunks, 1u);
}

Tokens random_sentence(Rng& rng, std::size_t max_len) {
  static const std::vector<std::string> words = {"a", "b", "c", "d", "e"};
  Tokens t(1 + rng.index(max_len));
  for (auto& w : t) w = words[rng.index(words.size())];
  return t;
}

TEST(MetricProperty, RangesAndIdentityMaxima) {
  Rng rng(31);
  std::vector<Tokens> corpus;
  for (int i = 0; i < 40; ++i) corpus.push_back(random_sentence(rng, 6));
  const NistInfo info(corpus);
  for (int trial = 0; trial < 300; ++trial) {
    const auto hyp = random_sentence(rng, 6);
    const auto ref = random_sentence(rng, 6);
    const double b = bleu(hyp, ref), m = meteor(hyp, ref), n = nist(hyp, ref, info);
    EXPECT_GE(b, 0.0);
    EXPECT_LE(b, 1.0);
    EXPECT_GE(m, 0.0);
    EXPECT_LE(m, 1.0);
    EXPECT_GE(n, 0.0);

    EXPECT_DOUBLE_EQ(bleu(ref, ref), 1.0);
    const double len = static_cast<double>(ref.size());
    EXPECT_NEAR(meteor(ref, ref), 1.0 - 0.5 / (len * len * len), 1e-12);
    const double self = nist(ref, ref, info);
    auto perm = ref;
    std::sort(perm.begin(), perm.end());
    do {
      EXPECT_LE(nist(perm, ref, info), self + 1e-12);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST(MetricProperty, NistInfoNonNegative) {
  Rng rng(32);
  std::vector<Tokens> corpus;
  for (int i = 0; i < 60; ++i) corpus.push_back(random_sentence(rng, 8));
  const NistInfo info(corpus);
  for (const auto& s : corpus) {
    for (std::size_t n = 1; n <= 5; ++n) {
      for (std::size_t i = 0; i + n <= s.size(); ++i) {
        EXPECT_GE(info.info(Tokens(s.begin() + i, s.begin() + i + n)), 0.0);
      }
    }
  }
}

// Two values m +- sd/sqrt(2) have mean m and sample sd exactly sd.
Descriptive from_mean_sd(double mean, double sd) {
  const std::vector<double> v = {mean - sd / std::sqrt(2.0), mean + sd / std::sqrt(2.0)};
  return descriptive_stats(v);
}

TEST(Descriptive, LengthTableCoefficientsOfVariation) {
  struct Row {
    double mean, sd, cv;
  };
  for (const Row& r : {Row{2.632, 1.647, 62.57}, Row{2.964, 1.866, 62.96}, Row{2.117, 1.096, 51.77},
                       Row{1.784, 0.525, 29.43}}) {
    const auto d = from_mean_sd(r.mean, r.sd);
    EXPECT_NEAR(d.mean, r.mean, 1e-12);
    EXPECT_NEAR(d.sd, r.sd, 1e-12);
    ASSERT_TRUE(d.cv_percent);
    EXPECT_NEAR(*d.cv_percent, r.cv, 0.02);
  }
}

TEST(Descriptive, EdgeCases) {
  const std::vector<double> constant = {3.0, 3.0, 3.0};
  const auto c = descriptive_stats(constant);
  EXPECT_EQ(c.sd, 0.0);
  EXPECT_EQ(c.cv_percent, 0.0);
  const std::vector<double> single = {4.0};
  EXPECT_EQ(descriptive_stats(single).sd, 0.0);
  const std::vector<double> zero_mean = {-1.0, 1.0};
  EXPECT_FALSE(descriptive_stats(zero_mean).cv_percent);
  EXPECT_THROW(descriptive_stats(std::vector<double>{}), std::invalid_argument);
  const std::vector<double> three = {0.0, 0.5, 1.0};
  EXPECT_DOUBLE_EQ(descriptive_stats(three).sd, 0.5);
}

TEST(DescriptiveProperty, CvIsScaleInvariant) {
  Rng rng(33);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> xs(2 + rng.index(20));
    for (double& x : xs) x = rng.uniform(0.1, 10.0);
    const double c = std::exp(rng.uniform(-5.0, 5.0));
    std::vector<double> scaled = xs;
    for (double& x : scaled) x *= c;
    EXPECT_NEAR(*descriptive_stats(xs).cv_percent, *descriptive_stats(scaled).cv_percent, 1e-9);
  }
}

TEST(MinMax, Examples) {
  const std::vector<double> a = {1, 2, 3};
  EXPECT_EQ(min_max_normalize(a).values, (std::vector<double>{0, 0.5, 1}));
  const std::vector<double> means = {0.046, 0.058, 0.107};
  const auto n = min_max_normalize(means);
  EXPECT_EQ(n.values[0], 0.0);
  EXPECT_NEAR(n.values[1], 0.1967, 5e-5);
  EXPECT_EQ(n.values[2], 1.0);
  EXPECT_FALSE(n.degenerate);
  const std::vector<double> flat = {0.2, 0.2};
  const auto d = min_max_normalize(flat);
  EXPECT_TRUE(d.degenerate);
  EXPECT_EQ(d.values, (std::vector<double>{0, 0}));
}

TEST(MinMaxProperty, UnitIntervalWithAttainedEnds) {
  Rng rng(34);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> xs(2 + rng.index(30));
    for (double& x : xs) x = rng.uniform(-100.0, 100.0);
    const auto n = min_max_normalize(xs);
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    for (double v : n.values) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_EQ(n.values[static_cast<std::size_t>(lo - xs.begin())], 0.0);
    EXPECT_EQ(n.values[static_cast<std::size_t>(hi - xs.begin())], 1.0);
  }
}

TEST(Format, MeanSd) {
  EXPECT_EQ(format_mean_sd(0.794, 0.349), "0.794 ± 0.349");
  EXPECT_EQ(format_mean_sd(0.5, 0.5), "0.500 ± 0.500");
}

PredictionRecord pred(std::string id, std::string original, std::string predicted) {
  return {std::move(id), "review text", std::move(original), std::move(predicted), "bilstm"};
}

TEST(Creativity, Examples) {
  const std::vector<PredictionRecord> dup = {pred("1", "a", "a"), pred("2", "b", "a"), pred("3", "a", "b")};
  EXPECT_EQ(creativity_stats(dup).unique_predictions, 2u);

  const std::vector<PredictionRecord> all = {pred("1", "x y z", "x y"), pred("2", "y", "z")};
  const auto c = creativity_stats(all);
  EXPECT_EQ(c.original_vocab_size, 3u);
  EXPECT_EQ(c.vocab_used_count, 3u);
  EXPECT_DOUBLE_EQ(c.vocab_used_percent, 100.0);

  const std::vector<PredictionRecord> disjoint = {pred("1", "x y", "p"), pred("2", "z", "q r")};
  EXPECT_EQ(creativity_stats(disjoint).vocab_used_count, 0u);
  EXPECT_EQ(creativity_stats(disjoint).vocab_used_percent, 0.0);
}

TEST(WordFrequencies, Examples) {
  const std::vector<std::string> one = {"a b a"};
  EXPECT_EQ(word_frequencies(one, 10), (std::vector<WordCount>{{"a", 2}, {"b", 1}}));
  const std::vector<std::string> punct = {"x !", "x"};
  EXPECT_EQ(word_frequencies(punct, 10), (std::vector<WordCount>{{"x", 2}}));
  const std::vector<std::string> ties = {"b a c b a", "[SEP] <unk> c"};
  EXPECT_EQ(word_frequencies(ties, 10), (std::vector<WordCount>{{"a", 2}, {"b", 2}, {"c", 2}}));
  EXPECT_EQ(word_frequencies(ties, 1), (std::vector<WordCount>{{"a", 2}}));
}

void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& rows,
                       const std::string& extra = "") {
  std::ofstream out(path);
  for (const auto& r : rows) out << r.to_json().dump() << "\n";
  out << extra;
}

TEST(EvaluateFile, IdentityGivesPerfectBleu) {
  testing::TempDir dir;
  std::vector<PredictionRecord> rows;
  for (int i = 0; i < 6; ++i) rows.push_back(pred(std::to_string(i), "produto muito bom " + std::to_string(i % 2 ? 1 : 2),
                                                  ""));
  for (auto& r : rows) {
    r.original_title = clean_text(r.original_title + " ótimo");
    r.predicted_title = r.original_title;
  }
  write_predictions(dir / "p.jsonl", rows);
  const auto report = evaluate_file(dir / "p.jsonl");
  EXPECT_EQ(report.rows, 6u);
  EXPECT_DOUBLE_EQ(report.metrics.at("bleu").stats.mean, 1.0);
  EXPECT_EQ(report.metrics.at("bleu").stats.sd, 0.0);
  const auto j = report.to_json();
  EXPECT_DOUBLE_EQ(j["metrics"]["bleu"]["mean"].get<double>(), 1.0);
  EXPECT_TRUE(j["lengths"]["original"].contains("cv_percent"));
}

TEST(EvaluateFile, MalformedLinesSkippedAndEmptyFileRejected) {
  testing::TempDir dir;
  write_predictions(dir / "p.jsonl", {pred("1", "a b", "a"), pred("1", "a b", "b")}, "not json\n{\"id\": 3}\n");
  const auto report = evaluate_file(dir / "p.jsonl");
  EXPECT_EQ(report.rows, 1u);
  EXPECT_EQ(report.skipped_lines, 3u);

  testing::write_file(dir / "empty.jsonl", "");
  EXPECT_THROW(evaluate_file(dir / "empty.jsonl"), DataError);
  EXPECT_THROW(evaluate_file(dir / "missing.jsonl"), DataError);
}

TEST(EvaluateFile, RowScoresMatchOracleFixture) {
  const auto cases = load_fixture();
  std::vector<PredictionRecord> rows;
  std::vector<Tokens> refs;
  for (std::size_t i = 0; i < 5; ++i) rows.push_back(pred(std::to_string(i), cases[i].reference, cases[i].hypothesis));
  for (const auto& c : cases) refs.push_back(toks(c.reference));
  const auto report = evaluate_predictions(rows, std::span<const Tokens>(refs));
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_NEAR(report.metrics.at("bleu").scores[i], cases[i].bleu, 1e-9);
    EXPECT_NEAR(report.metrics.at("nist").scores[i], cases[i].nist, 1e-9);
    EXPECT_NEAR(report.metrics.at("meteor").scores[i], cases[i].meteor, 1e-9);
  }
}

TEST(EvaluateProperty, RowOrderDoesNotChangeAggregates) {
  Rng rng(35);
  std::vector<PredictionRecord> rows;
  for (int i = 0; i < 40; ++i) {
    rows.push_back(pred(std::to_string(i), join_tokens(random_sentence(rng, 5)), join_tokens(random_sentence(rng, 4))));
  }
  const auto base = evaluate_predictions(rows);
  for (int trial = 0; trial < 5; ++trial) {
    rng.shuffle(std::span<PredictionRecord>(rows));
    const auto other = evaluate_predictions(rows);
    for (const auto& [name, s] : base.metrics) {
      EXPECT_NEAR(other.metrics.at(name).stats.mean, s.stats.mean, 1e-12);
      EXPECT_NEAR(other.metrics.at(name).stats.sd, s.stats.sd, 1e-12);
      EXPECT_NEAR(other.metrics.at(name).normalized_mean, s.normalized_mean, 1e-12);
    }
    EXPECT_NEAR(other.lengths.predicted.mean, base.lengths.predicted.mean, 1e-12);
    EXPECT_EQ(other.creativity.unique_predictions, base.creativity.unique_predictions);
  }
}

AnnotationScore judgment(std::string item, double score, std::string source = "bilstm") {
  return {std::move(item), std::move(source), score, "ann", "2026-01-01T00:00:00Z"};
}

TEST(MetricF, Aggregates) {
  const std::vector<AnnotationScore> ones = {judgment("a", 1), judgment("b", 1), judgment("c", 1)};
  const auto s1 = metricf_aggregate(ones, std::nullopt, 3);
  EXPECT_DOUBLE_EQ(*s1.mean, 1.0);
  EXPECT_DOUBLE_EQ(*s1.sd, 0.0);

  const std::vector<AnnotationScore> mixed = {judgment("a", 0), judgment("b", 0.5), judgment("c", 1),
                                              judgment("d", 1, "original")};
  const auto s2 = metricf_aggregate(mixed, "bilstm", 50);
  EXPECT_EQ(s2.count, 3u);
  EXPECT_DOUBLE_EQ(*s2.mean, 0.5);
  EXPECT_DOUBLE_EQ(*s2.sd, 0.5);
  EXPECT_DOUBLE_EQ(s2.coverage_percent, 6.0);
  EXPECT_TRUE(s2.meets_sample_target);
  EXPECT_EQ(s2.to_json()["display"], "0.500 ± 0.500");
  EXPECT_FALSE(metricf_aggregate(mixed, "bilstm", 51).meets_sample_target);

  const auto empty = metricf_aggregate({}, "maskedlm", 10);
  EXPECT_EQ(empty.count, 0u);
  EXPECT_FALSE(empty.mean);
  EXPECT_TRUE(empty.to_json()["mean"].is_null());
}

TEST(MetricF, IngestRejectsOffScaleScores) {
  for (double bad : {0.7, -1.0, 0.25, 2.0, 0.51}) {
    auto j = judgment("a", 0).to_json();
    j["score"] = bad;
    EXPECT_THROW(AnnotationScore::from_json(j), DataError) << bad;
    EXPECT_FALSE(is_valid_metricf_score(bad));
    const std::vector<AnnotationScore> one = {judgment("a", bad)};
    EXPECT_THROW(metricf_aggregate(one, std::nullopt, 1), std::invalid_argument);
  }
  for (double ok : {0.0, 0.5, 1.0}) {
    auto j = judgment("a", ok).to_json();
    EXPECT_EQ(AnnotationScore::from_json(j).score, ok);
  }
  auto unknown = judgment("a", 1).to_json();
  unknown["source"] = "gpt";
  EXPECT_THROW(AnnotationScore::from_json(unknown), DataError);
}

}  // namespace
}  // namespace hashtag
