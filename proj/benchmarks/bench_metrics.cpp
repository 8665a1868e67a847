#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "persuade/evalkit.hpp"
#include "persuade/hashutil.hpp"

using namespace persuade;

static void BM_RocAuc(benchmark::State& state) {
  SplitMix64 rng(1);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < state.range(0); ++i) {
    scores.push_back(rng.next_double());
    labels.push_back(i % 3 == 0 ? 1 : 0);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(roc_auc(scores, labels));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RocAuc)->Arg(100)->Arg(10000);

static void BM_NdcgAt5(benchmark::State& state) {
  SplitMix64 rng(2);
  std::unordered_map<std::string, double> relevance;
  std::vector<std::string> ranking;
  for (int i = 0; i < state.range(0); ++i) {
    std::string id = "r" + std::to_string(i);
    relevance[id] = rng.next_double();
    ranking.push_back(id);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(ndcg_at_k(ranking, relevance, 5));
  }
}
BENCHMARK(BM_NdcgAt5)->Arg(100)->Arg(1000);

static void BM_SpearmanRho(benchmark::State& state) {
  SplitMix64 rng(3);
  std::vector<double> a, b;
  for (int i = 0; i < state.range(0); ++i) {
    a.push_back(rng.next_double());
    b.push_back(rng.next_double());
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(spearman_rho(a, b));
  }
}
BENCHMARK(BM_SpearmanRho)->Arg(100)->Arg(10000);

BENCHMARK_MAIN();
