#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "persuade/hashutil.hpp"
#include "persuade/retrieval.hpp"
#include "persuade/textutil.hpp"

using namespace persuade;

namespace {

std::vector<UserRecord> synth_records(std::size_t n, std::size_t words) {
  static const char* kWords[] = {"city",   "river", "policy", "music",  "garden",
                                 "travel", "books", "coffee", "market", "winter"};
  SplitMix64 rng(42);
  std::vector<UserRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    UserRecord rec;
    rec.record_id = "r" + std::to_string(i);
    rec.author_id = "u";
    rec.created_at = 1000 + static_cast<std::int64_t>(i);
    for (std::size_t w = 0; w < words; ++w) {
      if (w) rec.text += " ";
      rec.text += kWords[rng.bounded(10)];
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

static void BM_IndexLexical(benchmark::State& state) {
  auto records = synth_records(state.range(0), 24);
  for (auto _ : state) {
    benchmark::DoNotOptimize(index_lexical(records));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_IndexLexical)->Arg(100)->Arg(1000);

static void BM_ScoreLexical(benchmark::State& state) {
  auto records = synth_records(state.range(0), 24);
  LexicalIndex index = index_lexical(records);
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_lexical(index, "city river policy travel"));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ScoreLexical)->Arg(100)->Arg(1000)->Arg(10000);

static void BM_HashingEmbed(benchmark::State& state) {
  auto records = synth_records(1, state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(hashing_embed(records[0].text));
  }
}
BENCHMARK(BM_HashingEmbed)->Arg(16)->Arg(128);

static void BM_ScoreDense(benchmark::State& state) {
  auto records = synth_records(state.range(0), 24);
  VectorStore store;
  for (const auto& rec : records) store.add(rec.record_id, hashing_embed(rec.text));
  auto query = hashing_embed("city river policy travel");
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_dense(store, query));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ScoreDense)->Arg(100)->Arg(1000)->Arg(10000);

static void BM_HybridRank(benchmark::State& state) {
  SplitMix64 rng(7);
  ScoreMap lex, den;
  for (int i = 0; i < state.range(0); ++i) {
    std::string id = "r" + std::to_string(i);
    lex[id] = rng.next_double() * 10;
    den[id] = rng.next_double();
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(hybrid_rank(lex, den, 0.5));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_HybridRank)->Arg(100)->Arg(1000);
