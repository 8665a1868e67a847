#include <doctest.h>

#include <map>
#include <set>

#include "persuade/errors.hpp"
#include "persuade/hashutil.hpp"
#include "persuade/utility.hpp"
#include "test_support.hpp"

using namespace persuade;
using testsupport::TempDir;
using testsupport::record;

TEST_CASE("partition_pool chunks seeded shuffles") {
  std::vector<std::string> pool;
  for (int i = 0; i < 10; ++i) pool.push_back("r" + std::to_string(i));

  auto partitions = partition_pool(pool, 5, 3, 11);
  REQUIRE(partitions.size() == 3);
  for (const auto& repeat : partitions) {
    REQUIRE(repeat.size() == 2);
    std::set<std::string> seen;
    for (const auto& group : repeat) {
      CHECK(group.size() == 5);
      seen.insert(group.begin(), group.end());
    }
    CHECK(seen.size() == 10);  // every record exactly once per repeat
  }

  SUBCASE("remainder group is kept short") {
    std::vector<std::string> seven(pool.begin(), pool.begin() + 7);
    auto parts = partition_pool(seven, 5, 1, 3);
    REQUIRE(parts[0].size() == 2);
    CHECK(parts[0][0].size() == 5);
    CHECK(parts[0][1].size() == 2);
  }

  SUBCASE("same seed reproduces the partitions") {
    CHECK(partition_pool(pool, 5, 3, 11) == partitions);
    CHECK(partition_pool(pool, 5, 3, 12) != partitions);
  }
}

namespace {

OracleWorld util_world(int n_records, const std::set<int>& leaking) {
  OracleWorld world;
  world.users["u01"] = {"gadoma"};
  for (int i = 0; i < n_records; ++i) {
    world.records["r" + std::to_string(i)] =
        leaking.count(i) ? std::vector<std::string>{"gadoma"} : std::vector<std::string>{};
  }
  world.comments["cd"] = {{"gadoma"}, 1};
  world.comments["cn"] = {{}, 0};
  world.degrade_every = 0;  // exact profiles for enumeration tests
  return world;
}

PersuasionInstance util_instance(int n_records, const std::set<int>& leaking) {
  PersuasionInstance inst;
  inst.instance_id = "ui";
  inst.user_id = "u01";
  inst.post_text = "cmv u01 the plan is fine";
  inst.post_created_at = 50000;
  inst.comments.push_back(testsupport::comment("cd", "think about gadoma for a second", 1));
  inst.comments.push_back(testsupport::comment("cn", "nah it is fine", 0));
  for (int i = 0; i < n_records; ++i) {
    std::string text = leaking.count(i) ? "journal entry mentioning gadoma openly"
                                        : "journal entry about the weather " + std::to_string(i);
    inst.full_history.push_back(record("r" + std::to_string(i), "u01", text, 1000 + i));
    inst.pool.push_back("r" + std::to_string(i));
  }
  return inst;
}

}  // namespace

TEST_CASE("score_profile computes the confusion over all comments") {
  TempDir dir("scoreprof");
  BackendConfig oracle = testsupport::write_world(dir, util_world(3, {0}));
  Gateway gateway;
  PersuasionInstance inst = util_instance(3, {0});

  Profile covering;
  covering.profile_id = "p-cover";
  covering.instance_id = inst.instance_id;
  covering.text = "• gadoma";

  ProfileScore score = score_profile(gateway, oracle, covering, inst, F1Mode::macro);
  CHECK(score.n_comments == 2);
  CHECK(score.confusion.tp == 1);
  CHECK(score.confusion.tn == 1);
  CHECK(score.f1 == 1.0);

  SUBCASE("profile missing the attribute predicts all-no") {
    Profile blank;
    blank.profile_id = "p-blank";
    blank.text = "• (no clear signals)";
    ProfileScore miss = score_profile(gateway, oracle, blank, inst, F1Mode::positive);
    CHECK(miss.f1 == 0.0);  // no positive predictions
    ProfileScore macro = score_profile(gateway, oracle, blank, inst, F1Mode::macro);
    CHECK(macro.f1 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("score_records accounting: nine profiles per record with defaults") {
  TempDir dir("accounting");
  BackendConfig oracle = testsupport::write_world(dir, util_world(12, {1}));
  Gateway gateway;
  PersuasionInstance inst = util_instance(12, {1});

  UtilityParams params;  // 5/3/3 @ 0.7
  UtilityTable table = score_records(gateway, oracle, oracle, inst, inst.pool, params,
                                     F1Mode::macro, 2025);
  REQUIRE(table.records.size() == 12);
  for (const auto& [record_id, entry] : table.records) {
    CHECK(entry.n_profiles == 9);
    CHECK(entry.utility >= 0.0);
    CHECK(entry.utility <= 1.0);
  }
  CHECK(table.profiles.size() == 3 * 3 * 3);  // ceil(12/5)=3 groups x 3 repeats x 3 samples

  SUBCASE("utilities recompute bit-exactly from provenance") {
    auto recomputed = table.recompute_from_provenance();
    for (const auto& [record_id, entry] : table.records)
      CHECK(recomputed.at(record_id) == entry.utility);
  }

  SUBCASE("tables round-trip through utility.jsonl") {
    save_utility_tables({table}, dir.file("utility.jsonl"));
    auto loaded = load_utility_tables(dir.file("utility.jsonl"));
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].instance_id == table.instance_id);
    CHECK(loaded[0].pool_order == table.pool_order);
    for (const auto& [record_id, entry] : table.records) {
      CHECK(loaded[0].at(record_id).utility == entry.utility);
      CHECK(loaded[0].at(record_id).n_profiles == entry.n_profiles);
      CHECK(loaded[0].at(record_id).profile_ids == entry.profile_ids);
    }
    CHECK(utility_table_to_json(loaded[0]) == utility_table_to_json(table));
  }
}

TEST_CASE("single-group pools give every record the same utility") {
  TempDir dir("symmetry");
  BackendConfig oracle = testsupport::write_world(dir, util_world(5, {0}));
  Gateway gateway;
  PersuasionInstance inst = util_instance(5, {0});

  UtilityParams params;
  UtilityTable table =
      score_records(gateway, oracle, oracle, inst, inst.pool, params, F1Mode::macro, 7);
  double first = table.records.begin()->second.utility;
  for (const auto& [_, entry] : table.records) CHECK(entry.utility == first);
}

TEST_CASE("constant predictor flattens utilities") {
  // no record leaks anything: every profile is the no-signal marker, the
  // predictor answers no everywhere, so all utilities equal the all-no F1
  TempDir dir("flat");
  BackendConfig oracle = testsupport::write_world(dir, util_world(8, {}));
  Gateway gateway;
  PersuasionInstance inst = util_instance(8, {});
  UtilityParams params;
  UtilityTable table =
      score_records(gateway, oracle, oracle, inst, inst.pool, params, F1Mode::macro, 3);
  for (const auto& [_, entry] : table.records)
    CHECK(entry.utility == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("oracle separation: the leaking record dominates by exhaustive enumeration") {
  TempDir dir("separation");
  BackendConfig oracle = testsupport::write_world(dir, util_world(10, {1}));
  Gateway gateway;
  PersuasionInstance inst = util_instance(10, {1});

  UtilityParams params;
  const std::uint64_t seed = 2028;  // chosen so no non-leaker shares every group with r1
  UtilityTable table =
      score_records(gateway, oracle, oracle, inst, inst.pool, params, F1Mode::macro, seed);

  // independent oracle: utility(r) = mean over groups containing r of
  // (group covers the leaker ? 1 : 1/3), re-deriving the partitions
  std::uint64_t instance_seed =
      stable_hash(seed, std::string_view("utility"), std::string_view(inst.instance_id));
  auto partitions = partition_pool(inst.pool, params.group_size, params.repeats, instance_seed);
  std::map<std::string, std::pair<double, int>> expected;
  for (const auto& repeat : partitions) {
    for (const auto& group : repeat) {
      bool has_leak = false;
      for (const auto& id : group) has_leak |= (id == "r1");
      double f1_value = has_leak ? 1.0 : 1.0 / 3.0;
      for (const auto& id : group) {
        expected[id].first += params.profiles_per_group * f1_value;
        expected[id].second += params.profiles_per_group;
      }
    }
  }
  for (const auto& [record_id, acc] : expected) {
    double mean = acc.first / acc.second;
    CHECK(table.at(record_id).utility == doctest::Approx(mean).epsilon(1e-12));
  }

  double leak_utility = table.at("r1").utility;
  CHECK(leak_utility == 1.0);
  for (const auto& [record_id, entry] : table.records) {
    if (record_id == "r1") continue;
    CHECK(entry.utility < leak_utility);
  }
}

TEST_CASE("utilities are equivariant under record relabeling") {
  // renaming record ids (texts and positions unchanged) must permute the
  // utility table identically: seeds key on positions, not ids
  TempDir dir("equivariance");
  BackendConfig oracle = testsupport::write_world(dir, util_world(8, {2}));
  Gateway gateway;
  PersuasionInstance inst = util_instance(8, {2});

  UtilityParams params;
  UtilityTable base =
      score_records(gateway, oracle, oracle, inst, inst.pool, params, F1Mode::macro, 99);

  PersuasionInstance renamed = inst;
  std::map<std::string, std::string> mapping;
  for (std::size_t i = 0; i < renamed.full_history.size(); ++i) {
    std::string fresh = "z" + std::to_string(i);
    mapping[renamed.full_history[i].record_id] = fresh;
    renamed.full_history[i].record_id = fresh;
  }
  for (auto& id : renamed.pool) id = mapping.at(id);

  // record ids in the oracle world are irrelevant to its behavior (it scans
  // text), but keep the world consistent anyway
  UtilityTable permuted = score_records(gateway, oracle, oracle, renamed, renamed.pool, params,
                                        F1Mode::macro, 99);
  for (const auto& [old_id, fresh_id] : mapping) {
    CHECK(permuted.at(fresh_id).utility == base.at(old_id).utility);
    CHECK(permuted.at(fresh_id).n_profiles == base.at(old_id).n_profiles);
  }
}

TEST_CASE("empty pool is rejected") {
  TempDir dir("emptypool");
  BackendConfig oracle = testsupport::write_world(dir, util_world(3, {}));
  Gateway gateway;
  PersuasionInstance inst = util_instance(3, {});
  UtilityParams params;
  CHECK_THROWS_AS(
      score_records(gateway, oracle, oracle, inst, {}, params, F1Mode::macro, 1), Error);
}
