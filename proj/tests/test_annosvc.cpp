#include <gtest/gtest.h>

#include <httplib.h>

#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "hashtag/annosvc.hpp"
#include "support.hpp"

namespace hashtag {
namespace {

using annosvc::AnnotationService;
using nlohmann::json;

std::chrono::system_clock::time_point day_one() {
  return std::chrono::system_clock::time_point(std::chrono::seconds(1767225600));
}

std::vector<annotation::AnnotationItem> make_pool(std::size_t n) {
  std::vector<metrics::PredictionRecord> preds;
  for (std::size_t i = 0; i < n; ++i) {
    preds.push_back({"r" + std::to_string(i), "review " + std::to_string(i), "original " + std::to_string(i),
                     "predicted " + std::to_string(i), "bilstm"});
  }
  return annotation::build_item_pool(preds);
}

void expect_blind(const json& items) {
  ASSERT_TRUE(items.is_array());
  for (const auto& item : items) {
    EXPECT_FALSE(item.contains("source")) << item.dump();
    EXPECT_TRUE(item.contains("item_id"));
    EXPECT_TRUE(item.contains("review_text"));
    EXPECT_TRUE(item.contains("candidate_title"));
  }
}

std::string score_body(const std::string& item, double score, const std::string& annotator = "ann") {
  return json{{"item_id", item}, {"score", score}, {"annotator", annotator}}.dump();
}

class ServiceTest : public ::testing::Test {
 protected:
  testing::TempDir dir;
  annotation::ScoreStore store{dir / "scores.jsonl"};
  AnnotationService service{make_pool(5), store, &day_one};  // 10 items

  json items(const std::string& n, const std::string& annotator = "ann") {
    const auto r = service.get_items(n, annotator);
    EXPECT_EQ(r.status, 200);
    const auto j = json::parse(r.body);
    expect_blind(j);
    return j;
  }
};

TEST_F(ServiceTest, ItemsAreBlindAndBounded) {
  EXPECT_EQ(items("2").size(), 2u);
  EXPECT_EQ(items("1000").size(), 10u);
  const auto r = service.get_items(std::nullopt, std::string("ann"));
  EXPECT_EQ(json::parse(r.body).size(), 10u);
}

TEST_F(ServiceTest, BadRequestsRejected) {
  for (const char* bad : {"0", "-1", "abc", "2x", "1001", ""}) {
    EXPECT_EQ(service.get_items(std::string(bad), std::string("ann")).status, 400) << bad;
  }
  EXPECT_EQ(service.get_items(std::string("2"), std::nullopt).status, 400);
  EXPECT_EQ(service.post_score("{not json").status, 400);
  EXPECT_EQ(service.post_score("[1]").status, 400);
  const auto id = items("1")[0]["item_id"].get<std::string>();
  EXPECT_EQ(service.post_score(score_body(id, 0.7)).status, 400);
  EXPECT_EQ(service.post_score(json{{"item_id", id}, {"score", "1"}, {"annotator", "ann"}}.dump()).status, 400);
  EXPECT_EQ(service.post_score(score_body(id, 1.0, "")).status, 400);
  EXPECT_EQ(service.post_score(score_body("nope", 1.0)).status, 404);
  EXPECT_EQ(store.line_count(), 0u);
}

TEST_F(ServiceTest, OrderIsStablePerAnnotatorAndDay) {
  const auto a1 = items("10", "alice");
  const auto a2 = items("10", "alice");
  const auto b = items("10", "bob");
  EXPECT_EQ(a1, a2);
  EXPECT_NE(a1, b);  // 10! orderings; a collision here would be a seeding bug
}

TEST_F(ServiceTest, ScoringDrainsQueueAndIsIdempotent) {
  const auto first = items("3");
  const std::vector<double> scores = {1.0, 0.5, 0.0};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto r = service.post_score(score_body(first[i]["item_id"], scores[i]));
    EXPECT_EQ(r.status, 204);
    EXPECT_TRUE(r.body.empty());
  }
  // Re-post overwrites: one effective score per (item, annotator).
  EXPECT_EQ(service.post_score(score_body(first[0]["item_id"], 1.0)).status, 204);
  EXPECT_EQ(store.line_count(), 4u);
  EXPECT_EQ(store.effective_scores().size(), 3u);

  const auto rest = items("100");
  EXPECT_EQ(rest.size(), 7u);
  std::set<std::string> seen;
  for (const auto& i : first) seen.insert(i["item_id"].get<std::string>());
  for (const auto& i : rest) EXPECT_FALSE(seen.count(i["item_id"].get<std::string>()));
  EXPECT_EQ(items("100", "other").size(), 10u);

  for (const auto& i : rest) EXPECT_EQ(service.post_score(score_body(i["item_id"], 1.0)).status, 204);
  EXPECT_TRUE(items("5").empty());
}

TEST_F(ServiceTest, SummaryEqualsAggregateOverStore) {
  auto summary = json::parse(service.get_summary().body);
  EXPECT_EQ(summary["overall"]["count"], 0);
  EXPECT_TRUE(summary["overall"]["mean"].is_null());

  std::vector<std::string> bilstm_ids;
  for (const auto& item : service.pool()) {
    if (item.source == "bilstm") bilstm_ids.push_back(item.item_id);
  }
  service.post_score(score_body(bilstm_ids[0], 0.0));
  service.post_score(score_body(bilstm_ids[1], 0.5));
  service.post_score(score_body(bilstm_ids[2], 1.0));
  summary = json::parse(service.get_summary().body);
  const auto& row = summary["sources"]["bilstm"];
  EXPECT_EQ(row["count"], 3);
  EXPECT_DOUBLE_EQ(row["mean"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(row["sd"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(row["coverage_percent"].get<double>(), 60.0);
  EXPECT_TRUE(row["meets_sample_target"].get<bool>());
  EXPECT_EQ(summary["sources"]["original"]["count"], 0);

  const auto scores = store.effective_scores();
  const auto direct = metrics::metricf_aggregate(scores, std::nullopt, service.pool().size());
  EXPECT_EQ(summary["overall"], direct.to_json());
}

TEST_F(ServiceTest, StoreSurvivesRestart) {
  const auto id = items("1")[0]["item_id"].get<std::string>();
  service.post_score(score_body(id, 0.5));
  annotation::ScoreStore reopened(dir / "scores.jsonl");
  AnnotationService again(make_pool(5), reopened, &day_one);
  const auto r = json::parse(again.get_items(std::string("100"), std::string("ann")).body);
  EXPECT_EQ(r.size(), 9u);
  EXPECT_EQ(json::parse(again.get_summary().body)["overall"]["count"], 1);
}

TEST(Http, EndToEndOverLoopback) {
  testing::TempDir dir;
  testing::write_file(dir / "index.html", "<html>annotate</html>");
  annotation::ScoreStore store(dir / "scores.jsonl");
  AnnotationService service(make_pool(3), store);
  annosvc::Server server(service, dir.path());
  const int port = server.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread worker([&] { server.run(); });

  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(5);

  auto page = client.Get("/index.html");
  ASSERT_TRUE(page);
  EXPECT_EQ(page->status, 200);
  EXPECT_EQ(page->body, "<html>annotate</html>");

  auto got = client.Get("/api/items?n=3&annotator=web");
  ASSERT_TRUE(got);
  EXPECT_EQ(got->status, 200);
  const auto list = json::parse(got->body);
  expect_blind(list);
  ASSERT_EQ(list.size(), 3u);

  const std::vector<double> scores = {1.0, 0.5, 0.0};
  for (std::size_t i = 0; i < 3; ++i) {
    auto posted = client.Post("/api/scores", score_body(list[i]["item_id"], scores[i], "web"), "application/json");
    ASSERT_TRUE(posted);
    EXPECT_EQ(posted->status, 204);
  }
  auto rejected = client.Post("/api/scores", score_body(list[0]["item_id"], 0.7, "web"), "application/json");
  ASSERT_TRUE(rejected);
  EXPECT_EQ(rejected->status, 400);
  auto missing = client.Post("/api/scores", score_body("ffffffffffffffff", 1.0, "web"), "application/json");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  auto bad_n = client.Get("/api/items?n=abc&annotator=web");
  ASSERT_TRUE(bad_n);
  EXPECT_EQ(bad_n->status, 400);

  auto summary = client.Get("/api/summary");
  ASSERT_TRUE(summary);
  const auto s = json::parse(summary->body);
  EXPECT_EQ(s["overall"]["count"], 3);
  EXPECT_DOUBLE_EQ(s["overall"]["mean"].get<double>(), 0.5);
  EXPECT_DOUBLE_EQ(s["overall"]["sd"].get<double>(), 0.5);

  server.stop();
  worker.join();
  EXPECT_FALSE(server.running());
  EXPECT_EQ(testing::read_lines(dir / "scores.jsonl").size(), 3u);
}

TEST(Http, ConcurrentPostsAreSerialized) {
  testing::TempDir dir;
  annotation::ScoreStore store(dir / "scores.jsonl");
  AnnotationService service(make_pool(20), store);
  annosvc::Server server(service);
  const int port = server.bind("127.0.0.1", 0);
  std::thread worker([&] { server.run(); });

  std::vector<std::thread> clients;
  for (int c = 0; c < 4; ++c) {
    clients.emplace_back([&, c] {
      httplib::Client client("127.0.0.1", port);
      for (std::size_t i = static_cast<std::size_t>(c); i < service.pool().size(); i += 4) {
        client.Post("/api/scores", score_body(service.pool()[i].item_id, 1.0, "c" + std::to_string(c)),
                    "application/json");
      }
    });
  }
  for (auto& t : clients) t.join();
  httplib::Client client("127.0.0.1", port);
  auto root = client.Get("/");
  ASSERT_TRUE(root);
  EXPECT_EQ(root->status, 200);
  server.stop();
  worker.join();

  const auto lines = testing::read_lines(dir / "scores.jsonl");
  EXPECT_EQ(lines.size(), 40u);
  for (const auto& l : lines) EXPECT_NO_THROW(metrics::AnnotationScore::from_json(json::parse(l)));
}

}  // namespace
}  // namespace hashtag
