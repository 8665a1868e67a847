#include <benchmark/benchmark.h>

#include <filesystem>

#include "persuade/gateway.hpp"
#include "persuade/synthetic.hpp"
#include "persuade/utility.hpp"

using namespace persuade;

namespace {

struct OracleFixture {
  SyntheticWorld world;
  BackendConfig backend;
  std::string dir;

  OracleFixture() {
    WorldSpec spec;
    spec.seed = 4;
    spec.n_users = 4;
    spec.records_per_user = 50;
    spec.leaking_per_user = 3;
    world = make_world(spec);
    dir = (std::filesystem::temp_directory_path() / "persuade_bench_world").string();
    std::filesystem::create_directories(dir);
    world.world.save(dir + "/world.json");
    backend.kind = BackendConfig::Kind::oracle;
    backend.world_path = dir + "/world.json";
  }
};

OracleFixture& fixture() {
  static OracleFixture instance;
  return instance;
}

}  // namespace

static void BM_OraclePredict(benchmark::State& state) {
  auto& fix = fixture();
  Gateway gateway;
  const auto& inst = fix.world.corpus.instances[0];
  PredictContext context = PredictContext::with_profile("• " +
                                                        fix.world.world.users.begin()->second[0]);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gateway.predict_view_change(
        fix.backend, inst.post_text, inst.comments[0].text, context));
  }
}
BENCHMARK(BM_OraclePredict);

static void BM_ScoreRecordsOneInstance(benchmark::State& state) {
  auto& fix = fixture();
  Gateway gateway;
  const auto& inst = fix.world.corpus.instances[0];
  std::vector<std::string> pool;
  for (const auto& rec : inst.full_history) pool.push_back(rec.record_id);
  UtilityParams params;
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_records(gateway, fix.backend, fix.backend, inst, pool,
                                           params, F1Mode::macro, 5, 4));
  }
  // 30 groups x 3 profiles, each scored over 3 comments
  state.SetItemsProcessed(state.iterations() * 90);
}
BENCHMARK(BM_ScoreRecordsOneInstance);
