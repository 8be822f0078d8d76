#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "hashtag/corpus.hpp"
#include "hashtag/maskedlm.hpp"
#include "hashtag/optimizer.hpp"
#include "hashtag/seq2seq.hpp"
#include "hashtag/text.hpp"
#include "hashtag/vocabulary.hpp"

namespace hashtag::testing {

inline std::filesystem::path data_dir() { return HASHTAG_TEST_DATA_DIR; }
inline std::filesystem::path fixture_dir() { return HASHTAG_TEST_FIXTURE_DIR; }

// Directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("hashtag-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << contents;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

// The 32-pair toy corpus with a vocabulary covering all of it.
struct ToyCorpus {
  std::vector<corpus::ReviewRecord> records;
  Vocabulary vocab;
};

inline ToyCorpus load_toy_corpus() {
  ToyCorpus toy;
  toy.records = corpus::load_reviews(data_dir() / "toy_pairs.csv").records;
  std::vector<std::string> texts;
  for (const auto& r : toy.records) {
    texts.push_back(clean_text(r.title_raw));
    texts.push_back(clean_text(r.text_raw));
  }
  toy.vocab = Vocabulary::build(texts, 1000);
  return toy;
}

struct OverfitResult {
  double accuracy = 0.0;       // teacher-forced / mask accuracy after training
  double exact_match = 0.0;    // fraction of titles reproduced by decoding
  std::size_t epochs = 0;
  double seconds = 0.0;
};

// Trains until every supervised position is predicted correctly or the epoch
// budget is exhausted, then decodes every training review.
inline OverfitResult overfit_seq2seq(const ToyCorpus& toy, std::size_t max_epochs = 500) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<corpus::Seq2SeqExample> examples;
  for (const auto& r : toy.records) {
    if (auto ex = corpus::make_seq2seq_example(r, toy.vocab)) examples.push_back(*ex);
  }
  auto config = seq2seq::Seq2SeqConfig::tiny(toy.vocab.size());
  seq2seq::Seq2SeqModel model(config, 7);
  AdamOptimizer opt(AdamConfig{0.01});
  OverfitResult result;
  for (std::size_t epoch = 1; epoch <= max_epochs; ++epoch) {
    result.epochs = epoch;
    seq2seq::train_epoch(model, opt, examples, 8, 1000 + epoch);
    if (epoch % 5 == 0 && seq2seq::evaluate(model, examples).accuracy >= 1.0) break;
  }
  result.accuracy = seq2seq::evaluate(model, examples).accuracy;
  std::size_t exact = 0;
  for (const auto& r : toy.records) {
    const auto src = corpus::encode(clean_text(r.text_raw), toy.vocab, config.max_source_len, true);
    const auto out = model.greedy_decode(src, config.max_target_len);
    exact += corpus::decode(out.tokens, toy.vocab) == clean_text(r.title_raw) ? 1 : 0;
  }
  result.exact_match = static_cast<double>(exact) / static_cast<double>(toy.records.size());
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

inline OverfitResult overfit_maskedlm(const ToyCorpus& toy, std::size_t max_epochs = 500) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<corpus::MaskedStepExample> examples;
  for (const auto& r : toy.records) {
    for (auto& e : corpus::expand_masked_examples(r, toy.vocab)) examples.push_back(std::move(e));
  }
  auto config = mlm::TransformerConfig::tiny(toy.vocab.size());
  mlm::MaskedLMModel model(config, 7);
  AdamOptimizer opt(AdamConfig{0.005});
  OverfitResult result;
  for (std::size_t epoch = 1; epoch <= max_epochs; ++epoch) {
    result.epochs = epoch;
    mlm::train_epoch(model, opt, examples, 8, 2000 + epoch);
    if (epoch % 5 == 0 && mlm::evaluate(model, examples).accuracy >= 1.0) break;
  }
  result.accuracy = mlm::evaluate(model, examples).accuracy;
  std::size_t exact = 0;
  const auto predictor = mlm::model_predictor(model);
  for (const auto& r : toy.records) {
    const auto review = corpus::encode(clean_text(r.text_raw), toy.vocab, config.max_len, false);
    const auto trace = mlm::generate_autoregressive(predictor, review, config.max_len);
    exact += corpus::decode(trace.tokens, toy.vocab) == clean_text(r.title_raw) ? 1 : 0;
  }
  result.exact_match = static_cast<double>(exact) / static_cast<double>(toy.records.size());
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace hashtag::testing
