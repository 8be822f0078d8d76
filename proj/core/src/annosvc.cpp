#include "hashtag/annosvc.hpp"

#include <charconv>
#include <stdexcept>

#include <httplib.h>

#include "hashtag/rng.hpp"

namespace hashtag::annosvc {

namespace {

Response error(int status, const std::string& message) {
  return {status, nlohmann::json{{"error", message}}.dump(), "application/json"};
}

constexpr const char* kPlaceholderPage =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>annotation service</title></head>"
    "<body><p>The annotation API is running. Endpoints: GET /api/items, POST /api/scores, GET /api/summary.</p>"
    "</body></html>";

}  // namespace

AnnotationService::AnnotationService(std::vector<annotation::AnnotationItem> pool, annotation::ScoreStore& store,
                                     Clock clock)
    : pool_(std::move(pool)), store_(store), clock_(std::move(clock)) {
  for (std::size_t i = 0; i < pool_.size(); ++i) {
    if (!index_.emplace(pool_[i].item_id, i).second) {
      throw std::invalid_argument("duplicate item id " + pool_[i].item_id);
    }
  }
}

Response AnnotationService::get_items(const std::optional<std::string>& n,
                                      const std::optional<std::string>& annotator) const {
  if (!annotator || annotator->empty()) return error(400, "annotator is required");
  std::size_t count = kDefaultBatch;
  if (n) {
    const char* first = n->data();
    const char* last = first + n->size();
    long long parsed = 0;
    auto [ptr, ec] = std::from_chars(first, last, parsed);
    if (ec != std::errc() || ptr != last || parsed < 1 || parsed > static_cast<long long>(kMaxBatch)) {
      return error(400, "n must be an integer in [1, " + std::to_string(kMaxBatch) + "]");
    }
    count = static_cast<std::size_t>(parsed);
  }
  const std::uint64_t seed = fnv1a64(annotation::utc_day(clock_()), fnv1a64(*annotator + "\x1f"));
  auto items = annotation::pending_items(pool_, store_, *annotator, count, seed);
  nlohmann::json body = nlohmann::json::array();
  for (const auto& item : items) body.push_back(item.to_json(false));
  return {200, body.dump(), "application/json"};
}

Response AnnotationService::post_score(const std::string& body) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    return error(400, "body is not valid JSON");
  }
  if (!doc.is_object()) return error(400, "body must be a JSON object");
  const auto item_id = doc.find("item_id");
  const auto score = doc.find("score");
  const auto annotator = doc.find("annotator");
  if (item_id == doc.end() || !item_id->is_string()) return error(400, "item_id must be a string");
  if (annotator == doc.end() || !annotator->is_string() || annotator->get<std::string>().empty()) {
    return error(400, "annotator must be a non-empty string");
  }
  if (score == doc.end() || !score->is_number() || !metrics::is_valid_metricf_score(score->get<double>())) {
    return error(400, "score must be 0, 0.5 or 1");
  }
  const auto it = index_.find(item_id->get<std::string>());
  if (it == index_.end()) return error(404, "unknown item");
  const auto& item = pool_[it->second];
  store_.append(metrics::AnnotationScore{item.item_id, item.source, score->get<double>(),
                                         annotator->get<std::string>(), annotation::utc_timestamp(clock_())});
  return {204, "", "application/json"};
}

Response AnnotationService::get_summary() const {
  const auto scores = store_.effective_scores();
  return {200, annotation::summary_json(pool_, scores).dump(), "application/json"};
}

// ---------------------------------------------------------------------------

struct Server::Impl {
  AnnotationService& service;
  httplib::Server http;

  static void reply(httplib::Response& res, const Response& r) {
    res.status = r.status;
    if (r.status != 204) res.set_content(r.body, r.content_type);
  }

  static std::optional<std::string> param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    return req.get_param_value(name);
  }

  Impl(AnnotationService& s, const std::optional<std::filesystem::path>& static_dir) : service(s) {
    http.Get("/api/items", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, service.get_items(param(req, "n"), param(req, "annotator")));
    });
    http.Post("/api/scores", [this](const httplib::Request& req, httplib::Response& res) {
      reply(res, service.post_score(req.body));
    });
    http.Get("/api/summary",
             [this](const httplib::Request&, httplib::Response& res) { reply(res, service.get_summary()); });
    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      reply(res, error(500, what));
    });
    if (static_dir && std::filesystem::is_directory(*static_dir)) {
      http.set_mount_point("/", static_dir->string());
    } else {
      http.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(kPlaceholderPage, "text/html; charset=utf-8");
      });
    }
  }
};

Server::Server(AnnotationService& service, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(service, static_dir)) {}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->http.bind_to_any_port(host);
    if (bound <= 0) throw std::runtime_error("cannot bind " + host);
    return bound;
  }
  if (!impl_->http.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Server::run() { impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_) impl_->http.stop();
}

bool Server::running() const { return impl_->http.is_running(); }

}  // namespace hashtag::annosvc
