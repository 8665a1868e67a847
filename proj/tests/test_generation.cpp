#include <doctest.h>

#include <set>

#include "persuade/errors.hpp"
#include "persuade/generation.hpp"
#include "persuade/oracle.hpp"
#include "persuade/prompts.hpp"
#include "persuade/retrieval.hpp"
#include "test_support.hpp"

using namespace persuade;
using testsupport::TempDir;
using testsupport::record;

namespace {

OracleWorld gen_world() {
  OracleWorld world;
  world.users["u07"] = {"bodalu", "kunera"};
  world.users["u09"] = {"mivoto"};
  world.records["r1"] = {"bodalu", "kunera"};
  world.records["r2"] = {};
  world.comments["c1"] = {{"bodalu"}, 1};
  world.comments["c0"] = {{}, 0};
  return world;
}

}  // namespace

TEST_CASE("generate_profile fills the profiler template and returns bullets") {
  TempDir dir("genprof");
  BackendConfig oracle = testsupport::write_world(dir, gen_world());
  Gateway gateway;

  std::vector<UserRecord> group{
      record("r1", "u07", "notes on bodalu and kunera today", 10),
      record("r2", "u07", "nothing in particular", 11),
  };
  Profile profile =
      generate_profile(gateway, oracle, "inst-1", "a post by u07", group, 0.0);
  CHECK(profile.text == "• bodalu\n• kunera");
  CHECK(profile.instance_id == "inst-1");
  CHECK(profile.record_ids == std::vector<std::string>{"r1", "r2"});

  SUBCASE("empty record group is rejected") {
    CHECK_THROWS_AS(generate_profile(gateway, oracle, "i", "post", {}, 0.0), Error);
  }
  SUBCASE("blank post is rejected") {
    CHECK_THROWS_AS(generate_profile(gateway, oracle, "i", " ", group, 0.0), Error);
  }
}

TEST_CASE("sample_profiles yields dense sample indexes with distinct seeds") {
  TempDir dir("sample");
  BackendConfig oracle = testsupport::write_world(dir, gen_world());
  Gateway gateway;
  std::vector<UserRecord> group{record("r1", "u07", "bodalu talk", 10)};

  auto profiles = sample_profiles(gateway, oracle, "inst", "post by u07", group, 16, 0.7, 100);
  REQUIRE(profiles.size() == 16);
  for (int i = 0; i < 16; ++i) CHECK(profiles[i].sample_index == i);
  // seeds 100..115: the oracle degrades those with seed % 4 == 3
  int degraded = 0;
  for (const auto& profile : profiles)
    degraded += profile.text == "• (no clear signals)" ? 1 : 0;
  CHECK(degraded == 4);

  auto again = sample_profiles(gateway, oracle, "inst", "post by u07", group, 16, 0.7, 100);
  for (int i = 0; i < 16; ++i) CHECK(again[i].text == profiles[i].text);

  CHECK_THROWS_AS(sample_profiles(gateway, oracle, "inst", "post", group, 1, 0.7, 0), Error);
}

TEST_CASE("stage-1 question is deterministic and ends with a question mark") {
  TempDir dir("stage1");
  BackendConfig oracle = testsupport::write_world(dir, gen_world());
  Gateway gateway;
  std::string q1 = generate_stage1_question(gateway, oracle, "cmv by u07 about parks");
  std::string q2 = generate_stage1_question(gateway, oracle, "cmv by u07 about parks");
  CHECK(q1 == q2);
  REQUIRE(!q1.empty());
  CHECK(q1.back() == '?');
  CHECK(q1.find("bodalu") != std::string::npos);
  CHECK(q1.find("kunera") != std::string::npos);
}

TEST_CASE("stage-2 queries cover question and post attribute tokens") {
  TempDir dir("stage2");
  BackendConfig oracle = testsupport::write_world(dir, gen_world());
  Gateway gateway;
  auto candidates = generate_stage2_queries(gateway, oracle, "inst", "post by u07",
                                            "What matters regarding kunera?", 16, 0.8, 40);
  REQUIRE(candidates.size() == 16);
  int faithful = 0;
  for (const auto& candidate : candidates) {
    CHECK(candidate.stage1_question == "What matters regarding kunera?");
    if (candidate.text.find("bodalu") != std::string::npos) {
      ++faithful;
      CHECK(candidate.text.find("kunera") != std::string::npos);
    } else {
      // decoy samples name the next user's attributes instead
      CHECK(candidate.text.find("mivoto") != std::string::npos);
    }
  }
  CHECK(faithful == 12);
}

TEST_CASE("inference_query composes stage 1 and stage 2 greedily") {
  TempDir dir("infq");
  BackendConfig oracle = testsupport::write_world(dir, gen_world());
  Gateway gateway;
  std::string query = inference_query(gateway, oracle, std::nullopt, "post by u07 here");
  CHECK(query.find("bodalu") != std::string::npos);
  CHECK(query.find("kunera") != std::string::npos);
  CHECK(query == inference_query(gateway, oracle, std::nullopt, "post by u07 here"));
}

TEST_CASE("generated query surfaces attributes absent from the post") {
  TempDir dir("endtoend");
  BackendConfig oracle = testsupport::write_world(dir, gen_world());
  Gateway gateway;

  PersuasionInstance inst;
  inst.instance_id = "e2e";
  inst.user_id = "u07";
  inst.post_text = "cmv u07 the city garden plan is fine as is";
  inst.post_created_at = 1000;
  inst.comments.push_back(testsupport::comment("c1", "but bodalu though", 1));
  inst.comments.push_back(testsupport::comment("c0", "meh", 0));
  inst.full_history = {
      record("r1", "u07", "i care deeply about bodalu and kunera", 10),
      record("r2", "u07", "the garden was nice last week", 11),
      record("r3", "u07", "took the train to the harbor", 12),
  };

  std::string query = inference_query(gateway, oracle, std::nullopt, inst.post_text);
  // the attribute tokens are not in the post itself
  CHECK(inst.post_text.find("bodalu") == std::string::npos);
  CHECK(query.find("bodalu") != std::string::npos);

  Retriever retriever(inst.full_history, gateway, oracle);
  RetrieveOpts opts;
  opts.k = 1;
  opts.query_text = query;
  Ranking ranking = retrieve(QueryStrategy::generated, inst, retriever, gateway, opts);
  CHECK(ranking.ids()[0] == "r1");
}

TEST_CASE("generate_hyde returns one completion used verbatim") {
  TempDir dir("hyde");
  BackendConfig oracle = testsupport::write_world(dir, gen_world());
  Gateway gateway;

  SUBCASE("oracle emits the post's salient tokens") {
    std::string pseudo = generate_hyde(gateway, oracle, "post by u07 on parks");
    CHECK(pseudo == "bodalu kunera");
  }

  SUBCASE("scripted mock text comes back verbatim") {
    prompts::Rendered rendered = prompts::hyde("the post");
    std::string key = chat_fixture_key(rendered.system, rendered.user, 0.0, 0);
    testsupport::write_file(dir.file("fixtures.jsonl"),
                            "{\"key_hash\":\"" + key +
                                "\",\"response\":\"i wrote about trail maintenance once\"}\n");
    BackendConfig mock;
    mock.kind = BackendConfig::Kind::mock;
    mock.fixtures_path = dir.file("fixtures.jsonl");
    CHECK(generate_hyde(gateway, mock, "the post") == "i wrote about trail maintenance once");
  }

  SUBCASE("empty post is rejected") {
    CHECK_THROWS_AS(generate_hyde(gateway, oracle, "  "), Error);
  }
}

TEST_CASE("mock backend scripts sixteen distinct candidate profiles") {
  TempDir dir("mock16");
  std::vector<UserRecord> group{record("r1", "u", "some passage", 5)};
  prompts::Rendered rendered = prompts::profiler("the post", prompts::passages_block({"some passage"}));

  std::string fixtures;
  for (int i = 0; i < 16; ++i) {
    std::string key = chat_fixture_key(rendered.system, rendered.user, 0.7, 100 + i);
    fixtures += "{\"key_hash\":\"" + key + "\",\"response\":\"\\u2022 trait " +
                std::to_string(i) + "\"}\n";
  }
  testsupport::write_file(dir.file("fixtures.jsonl"), fixtures);
  BackendConfig mock;
  mock.kind = BackendConfig::Kind::mock;
  mock.fixtures_path = dir.file("fixtures.jsonl");

  Gateway gateway;
  auto profiles = sample_profiles(gateway, mock, "inst", "the post", group, 16, 0.7, 100);
  std::set<std::string> texts;
  for (const auto& profile : profiles) texts.insert(profile.text);
  CHECK(texts.size() == 16);
}

TEST_CASE("a blank profiler completion raises EmptyProfile") {
  TempDir dir("blank");
  std::vector<UserRecord> group{record("r1", "u", "some passage", 5)};
  prompts::Rendered rendered =
      prompts::profiler("the post", prompts::passages_block({"some passage"}));
  std::string key = chat_fixture_key(rendered.system, rendered.user, 0.0, std::nullopt);
  testsupport::write_file(dir.file("fixtures.jsonl"),
                          "{\"key_hash\":\"" + key + "\",\"response\":\"  \"}\n");
  BackendConfig mock;
  mock.kind = BackendConfig::Kind::mock;
  mock.fixtures_path = dir.file("fixtures.jsonl");
  Gateway gateway;
  bool raised = false;
  try {
    generate_profile(gateway, mock, "inst", "the post", group, 0.0);
  } catch (const Error& e) {
    raised = true;
    CHECK(e.code() == Errc::empty_profile);
  }
  CHECK(raised);
}

TEST_CASE("a non-question stage-1 completion is kept with a warning") {
  TempDir dir("notq");
  prompts::Rendered rendered = prompts::stage1_question("the post");
  std::string key = chat_fixture_key(rendered.system, rendered.user, 0.0, 0);
  testsupport::write_file(dir.file("fixtures.jsonl"),
                          "{\"key_hash\":\"" + key +
                              "\",\"response\":\"this is a statement.\"}\n");
  BackendConfig mock;
  mock.kind = BackendConfig::Kind::mock;
  mock.fixtures_path = dir.file("fixtures.jsonl");
  Gateway gateway;
  CHECK(generate_stage1_question(gateway, mock, "the post") == "this is a statement.");
}

TEST_CASE("trained query generator path uses a single scripted completion") {
  TempDir dir("trained");
  BackendConfig oracle = testsupport::write_world(dir, gen_world());
  Gateway gateway;

  prompts::Rendered rendered = prompts::stage1_question("the post");
  std::string key = chat_fixture_key(rendered.system, rendered.user, 0.0, 0);
  testsupport::write_file(dir.file("fixtures.jsonl"),
                          "{\"key_hash\":\"" + key +
                              "\",\"response\":\"does the user value bodalu in practice\"}\n");
  BackendConfig trained;
  trained.kind = BackendConfig::Kind::mock;
  trained.fixtures_path = dir.file("fixtures.jsonl");

  std::string query = inference_query(gateway, oracle, trained, "the post");
  CHECK(query == "does the user value bodalu in practice");
}
