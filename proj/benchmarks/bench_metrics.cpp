#include <benchmark/benchmark.h>

#include "hashtag/metrics.hpp"
#include "hashtag/text.hpp"

namespace {

using hashtag::metrics::Tokens;

const Tokens kHyp = hashtag::split_tokens("otimo produto chegou rapido recomendo muito a todos");
const Tokens kRef = hashtag::split_tokens("produto otimo recomendo chegou muito rapido");

void BM_Bleu(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(hashtag::metrics::bleu(kHyp, kRef));
}
BENCHMARK(BM_Bleu);

void BM_Nist(benchmark::State& state) {
  const std::vector<Tokens> refs(200, kRef);
  const hashtag::metrics::NistInfo info(refs);
  for (auto _ : state) benchmark::DoNotOptimize(hashtag::metrics::nist(kHyp, kRef, info));
}
BENCHMARK(BM_Nist);

void BM_Meteor(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(hashtag::metrics::meteor(kHyp, kRef));
}
BENCHMARK(BM_Meteor);

}  // namespace

BENCHMARK_MAIN();
