#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hashtag/annotation.hpp"

namespace hashtag::annosvc {

using Clock = std::function<std::chrono::system_clock::time_point()>;

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// Transport-independent request handling for the annotation API.
class AnnotationService {
 public:
  static constexpr std::size_t kDefaultBatch = 10;
  static constexpr std::size_t kMaxBatch = 1000;

  AnnotationService(std::vector<annotation::AnnotationItem> pool, annotation::ScoreStore& store,
                    Clock clock = &std::chrono::system_clock::now);

  /// GET /api/items?n=&annotator=
  Response get_items(const std::optional<std::string>& n, const std::optional<std::string>& annotator) const;
  /// POST /api/scores
  Response post_score(const std::string& body);
  /// GET /api/summary
  Response get_summary() const;

  const std::vector<annotation::AnnotationItem>& pool() const { return pool_; }

 private:
  std::vector<annotation::AnnotationItem> pool_;
  std::map<std::string, std::size_t> index_;
  annotation::ScoreStore& store_;
  Clock clock_;
};

class Server {
 public:
  /// Static files under `static_dir` are served at "/"; without one a
  /// placeholder page is returned.
  Server(AnnotationService& service, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and returns the port (an ephemeral one when `port` is 0).
  /// Throws std::runtime_error on failure.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void run();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hashtag::annosvc
