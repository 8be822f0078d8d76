#include <benchmark/benchmark.h>

#include "support.hpp"

namespace {

using namespace hashtag;

void BM_Seq2SeqEpoch(benchmark::State& state) {
  const auto toy = testing::load_toy_corpus();
  std::vector<corpus::Seq2SeqExample> examples;
  for (const auto& r : toy.records) {
    if (auto ex = corpus::make_seq2seq_example(r, toy.vocab)) examples.push_back(*ex);
  }
  seq2seq::Seq2SeqModel model(seq2seq::Seq2SeqConfig::tiny(toy.vocab.size()), 1);
  AdamOptimizer opt(AdamConfig{0.01});
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(seq2seq::train_epoch(model, opt, examples, 8, ++seed));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(examples.size()));
}
BENCHMARK(BM_Seq2SeqEpoch)->Unit(benchmark::kMillisecond);

void BM_MaskedLMEpoch(benchmark::State& state) {
  const auto toy = testing::load_toy_corpus();
  std::vector<corpus::MaskedStepExample> examples;
  for (const auto& r : toy.records) {
    for (auto& e : corpus::expand_masked_examples(r, toy.vocab)) examples.push_back(std::move(e));
  }
  mlm::MaskedLMModel model(mlm::TransformerConfig::tiny(toy.vocab.size()), 1);
  AdamOptimizer opt(AdamConfig{0.005});
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(mlm::train_epoch(model, opt, examples, 16, ++seed));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(examples.size()));
}
BENCHMARK(BM_MaskedLMEpoch)->Unit(benchmark::kMillisecond);

void BM_GreedyDecode(benchmark::State& state) {
  const auto toy = testing::load_toy_corpus();
  const seq2seq::Seq2SeqModel model(seq2seq::Seq2SeqConfig::tiny(toy.vocab.size()), 1);
  const auto src = corpus::encode(clean_text(toy.records[0].text_raw), toy.vocab, model.config().max_source_len, true);
  for (auto _ : state) benchmark::DoNotOptimize(model.greedy_decode(src, 16));
}
BENCHMARK(BM_GreedyDecode);

}  // namespace
