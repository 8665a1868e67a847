#include "persuade/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "persuade/concurrency.hpp"
#include "persuade/errors.hpp"
#include "persuade/generation.hpp"
#include "persuade/hashutil.hpp"
#include "persuade/io.hpp"
#include "persuade/prompts.hpp"

namespace persuade {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

namespace {

const char* kDefaultProfilerTrainingMeta = R"({
  "method": "dpo",
  "base_model": "Llama-3.1-8B-Instruct",
  "lora_rank": 32,
  "lora_alpha": 64,
  "optimizer": "AdamW",
  "learning_rate": 5e-07,
  "lr_scheduler": "linear",
  "warmup_ratio": 0.05,
  "batch_size": 64,
  "beta": 0.1,
  "epochs": 3,
  "max_sequence_length": 16384
})";

const char* kDefaultQuerygenTrainingMeta = R"({
  "method": "dpo",
  "base_model": "Llama-3.1-8B-Instruct",
  "lora_rank": 16,
  "lora_alpha": 32,
  "learning_rate": 2e-05,
  "max_epochs": 3,
  "beta": 0.3
})";

BackendConfig backend_from_json(const json& obj) {
  BackendConfig config;
  std::string kind = obj.value("kind", "mock");
  if (kind == "http") config.kind = BackendConfig::Kind::http;
  else if (kind == "mock") config.kind = BackendConfig::Kind::mock;
  else if (kind == "oracle") config.kind = BackendConfig::Kind::oracle;
  else raise(Errc::bad_config, "unknown backend kind: " + kind);
  config.endpoint = obj.value("endpoint", "");
  config.model_name = obj.value("model_name", "");
  config.api_key_env = obj.value("api_key_env", "");
  config.max_concurrency = obj.value("max_concurrency", 4);
  if (config.max_concurrency < 1) raise(Errc::bad_config, "max_concurrency must be >= 1");
  if (obj.contains("retry")) {
    config.retry.max_attempts = obj["retry"].value("max_attempts", 3);
    config.retry.backoff_ms = obj["retry"].value("backoff_ms", 100);
  }
  config.fixtures_path = obj.value("fixtures", "");
  config.world_path = obj.value("world", "");
  config.embed_dim = obj.value("embed_dim", 64);
  config.timeout_sec = obj.value("timeout_sec", 30);
  if (config.kind == BackendConfig::Kind::http && config.endpoint.empty())
    raise(Errc::bad_config, "http backend requires an endpoint");
  if (config.kind == BackendConfig::Kind::oracle && config.world_path.empty())
    raise(Errc::bad_config, "oracle backend requires a world file");
  return config;
}

ojson backend_to_json(const BackendConfig& config) {
  ojson obj;
  switch (config.kind) {
    case BackendConfig::Kind::http: obj["kind"] = "http"; break;
    case BackendConfig::Kind::mock: obj["kind"] = "mock"; break;
    case BackendConfig::Kind::oracle: obj["kind"] = "oracle"; break;
  }
  if (!config.endpoint.empty()) obj["endpoint"] = config.endpoint;
  if (!config.model_name.empty()) obj["model_name"] = config.model_name;
  if (!config.api_key_env.empty()) obj["api_key_env"] = config.api_key_env;
  obj["max_concurrency"] = config.max_concurrency;
  obj["retry"] = ojson{{"max_attempts", config.retry.max_attempts},
                       {"backoff_ms", config.retry.backoff_ms}};
  if (!config.fixtures_path.empty()) obj["fixtures"] = config.fixtures_path;
  if (!config.world_path.empty()) obj["world"] = config.world_path;
  obj["embed_dim"] = config.embed_dim;
  return obj;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
  ojson root;
  try {
    root = ojson::parse(text);
  } catch (const std::exception& e) {
    raise(Errc::bad_config, std::string("config is not valid JSON: ") + e.what());
  }

  RunConfig config;
  const ojson& data = root.value("data", ojson::object());
  config.threads_path = data.value("threads", "");
  config.histories_path = data.value("histories", "");
  config.out_dir = data.value("out_dir", "out");
  config.min_history = data.value("min_history", 15);
  config.malformed_tolerance = data.value("malformed_tolerance", 0.10);

  const ojson& split = root.value("split", ojson::object());
  if (split.contains("ratios")) {
    auto r = split["ratios"].get<std::vector<double>>();
    if (r.size() != 3) raise(Errc::bad_config, "split.ratios needs 3 entries");
    config.ratios = {r[0], r[1], r[2]};
  }
  config.seed = root.value("seed", split.value("seed", 17ull));

  const ojson& pool = root.value("pool", ojson::object());
  config.pool_limit = pool.value("limit", 100u);
  config.pool_weight = pool.value("weight", 0.5);
  std::string fusion = pool.value("fusion", "minmax");
  if (fusion == "minmax") config.pool_fusion = FusionRule::minmax_weighted;
  else if (fusion == "rrf") config.pool_fusion = FusionRule::reciprocal_rank;
  else raise(Errc::bad_config, "unknown fusion rule: " + fusion);
  config.subsample_test = pool.value("subsample_test", false);

  const ojson& backends = root.value("backends", ojson::object());
  auto load_backend = [&](const char* role) {
    if (!backends.contains(role))
      raise(Errc::bad_config, std::string("backends.") + role + " missing");
    return backend_from_json(backends[role]);
  };
  config.predictor = load_backend("predictor");
  config.profiler = load_backend("profiler");
  config.querygen = load_backend("querygen");
  config.embedder = load_backend("embedder");
  if (backends.contains("trained_querygen") && !backends["trained_querygen"].is_null())
    config.trained_querygen = backend_from_json(backends["trained_querygen"]);

  const ojson& inference = root.value("inference", ojson::object());
  if (inference.contains("strategy")) {
    auto strategy = parse_strategy(inference["strategy"].get<std::string>());
    if (!strategy) raise(Errc::bad_config, "unknown retrieval strategy");
    config.strategy = *strategy;
  }
  config.k = inference.value("k", 5u);
  std::string context = inference.value("context", "profile");
  if (context == "profile") config.context = PredictContext::Kind::profile;
  else if (context == "history") config.context = PredictContext::Kind::history;
  else if (context == "none") config.context = PredictContext::Kind::none;
  else raise(Errc::bad_config, "unknown context variant: " + context);
  std::string f1_mode = inference.value("f1_mode", "positive");
  if (f1_mode == "positive") config.f1_mode = F1Mode::positive;
  else if (f1_mode == "macro") config.f1_mode = F1Mode::macro;
  else raise(Errc::bad_config, "unknown f1 mode: " + f1_mode);
  config.score_mode = inference.value("score_mode", true);
  config.n_score = inference.value("n_score", 1);

  const ojson& utility = root.value("utility", ojson::object());
  config.utility.group_size = utility.value("group_size", 5);
  config.utility.repeats = utility.value("repeats", 3);
  config.utility.profiles_per_group = utility.value("profiles_per_group", 3);
  config.utility.temperature = utility.value("temperature", 0.7);
  std::string umode = utility.value("f1_mode", "macro");
  config.utility_f1_mode = umode == "positive" ? F1Mode::positive : F1Mode::macro;

  const ojson& preference = root.value("preference", ojson::object());
  const ojson& prof = preference.value("profiler", ojson::object());
  config.profiler_pref_k = prof.value("k", 4);
  config.profiler_pref_delta = prof.value("delta", 0.05);
  config.groups_per_post = prof.value("groups_per_post", 2);
  config.profiler_group_size = prof.value("group_size", 5);
  config.profiler_candidates = prof.value("n_candidates", 16);
  config.profiler_candidate_temperature = prof.value("temperature", 0.7);
  const ojson& qg = preference.value("querygen", ojson::object());
  config.querygen_pref.pos_threshold = qg.value("pos_threshold", 0.65);
  config.querygen_pref.neg_threshold = qg.value("neg_threshold", 0.55);
  config.querygen_pref.min_margin = qg.value("min_margin", 0.10);
  config.querygen_pref.max_pairs_per_post = qg.value("max_pairs_per_post", 8);
  config.querygen_candidates = qg.value("n_candidates", 16);
  config.querygen_candidate_temperature = qg.value("temperature", 0.8);
  std::string scoring = qg.value("scoring_retrieval", "dense");
  if (scoring == "dense") config.querygen_hybrid_scoring = false;
  else if (scoring == "hybrid") config.querygen_hybrid_scoring = true;
  else raise(Errc::bad_config, "unknown scoring_retrieval: " + scoring);

  const ojson& training = preference.value("training_meta", ojson::object());
  config.training_meta_profiler_json =
      training.contains("profiler") ? training["profiler"].dump() : kDefaultProfilerTrainingMeta;
  config.training_meta_querygen_json =
      training.contains("querygen") ? training["querygen"].dump() : kDefaultQuerygenTrainingMeta;

  config.workers = root.value("workers", 4);
  config.eval_random_runs = root.value("eval_random_runs", 10);
  return config;
}

RunConfig RunConfig::load(const std::string& path) {
  return from_json_text(read_text_file(path));
}

std::string RunConfig::to_json() const {
  ojson root;
  root["data"] = ojson{{"threads", threads_path},
                       {"histories", histories_path},
                       {"out_dir", out_dir},
                       {"min_history", min_history},
                       {"malformed_tolerance", malformed_tolerance}};
  root["seed"] = seed;
  root["split"] = ojson{{"ratios", ratios}};
  root["pool"] = ojson{{"limit", pool_limit},
                       {"weight", pool_weight},
                       {"fusion", pool_fusion == FusionRule::minmax_weighted ? "minmax" : "rrf"},
                       {"subsample_test", subsample_test}};
  ojson backends;
  backends["predictor"] = backend_to_json(predictor);
  backends["profiler"] = backend_to_json(profiler);
  backends["querygen"] = backend_to_json(querygen);
  backends["embedder"] = backend_to_json(embedder);
  if (trained_querygen) backends["trained_querygen"] = backend_to_json(*trained_querygen);
  root["backends"] = std::move(backends);
  root["inference"] = ojson{{"strategy", strategy_name(strategy)},
                            {"k", k},
                            {"context",
                             context == PredictContext::Kind::profile
                                 ? "profile"
                                 : (context == PredictContext::Kind::history ? "history" : "none")},
                            {"f1_mode", f1_mode_name(f1_mode)},
                            {"score_mode", score_mode},
                            {"n_score", n_score}};
  root["utility"] = ojson{{"group_size", utility.group_size},
                          {"repeats", utility.repeats},
                          {"profiles_per_group", utility.profiles_per_group},
                          {"temperature", utility.temperature},
                          {"f1_mode", f1_mode_name(utility_f1_mode)}};
  root["preference"] =
      ojson{{"profiler",
             ojson{{"k", profiler_pref_k},
                   {"delta", profiler_pref_delta},
                   {"groups_per_post", groups_per_post},
                   {"group_size", profiler_group_size},
                   {"n_candidates", profiler_candidates},
                   {"temperature", profiler_candidate_temperature}}},
            {"querygen",
             ojson{{"pos_threshold", querygen_pref.pos_threshold},
                   {"neg_threshold", querygen_pref.neg_threshold},
                   {"min_margin", querygen_pref.min_margin},
                   {"max_pairs_per_post", querygen_pref.max_pairs_per_post},
                   {"n_candidates", querygen_candidates},
                   {"temperature", querygen_candidate_temperature},
                   {"scoring_retrieval", querygen_hybrid_scoring ? "hybrid" : "dense"}}},
            {"training_meta",
             ojson{{"profiler", ojson::parse(training_meta_profiler_json.empty()
                                                 ? kDefaultProfilerTrainingMeta
                                                 : training_meta_profiler_json)},
                   {"querygen", ojson::parse(training_meta_querygen_json.empty()
                                                 ? kDefaultQuerygenTrainingMeta
                                                 : training_meta_querygen_json)}}}};
  root["workers"] = workers;
  root["eval_random_runs"] = eval_random_runs;
  return root.dump(2) + "\n";
}

std::string RunConfig::prefs_dir(PreferencePair::Kind kind) const {
  return split_dir(Split::train) + "/prefs/" +
         (kind == PreferencePair::Kind::profiler ? "profiler" : "querygen");
}

// ---------------------------------------------------------------------------
// Shared step helpers

void save_pools(const std::map<std::string, std::vector<std::string>>& pools,
                const std::string& path) {
  ojson obj;
  for (const auto& [instance_id, ids] : pools) obj[instance_id] = ids;
  write_file_atomic(path, obj.dump(2) + "\n");
}

std::map<std::string, std::vector<std::string>> load_pools(const std::string& path) {
  json obj;
  try {
    obj = json::parse(read_text_file(path));
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    raise(Errc::schema_violation, path + ": " + e.what());
  }
  std::map<std::string, std::vector<std::string>> pools;
  for (const auto& [instance_id, ids] : obj.items())
    pools[instance_id] = ids.get<std::vector<std::string>>();
  return pools;
}

void apply_pools(Corpus& corpus,
                 const std::map<std::string, std::vector<std::string>>& pools) {
  for (auto& inst : corpus.instances) {
    auto it = pools.find(inst.instance_id);
    if (it != pools.end()) inst.pool = it->second;
  }
}

namespace {

Corpus load_prepared_corpus(const RunConfig& config, bool need_pools) {
  Corpus corpus = load_corpus(config.corpus_path());
  if (need_pools) apply_pools(corpus, load_pools(config.pools_path()));
  return corpus;
}

std::vector<const PersuasionInstance*> split_instances(const Corpus& corpus,
                                                       const SplitAssignment& splits,
                                                       Split split) {
  std::vector<const PersuasionInstance*> out;
  for (const auto& inst : corpus.instances) {
    auto it = splits.assignment.find(inst.instance_id);
    if (it != splits.assignment.end() && it->second == split) out.push_back(&inst);
  }
  return out;
}

std::vector<UserRecord> pool_records(const PersuasionInstance& inst) {
  if (inst.pool.empty())
    raise(Errc::missing_utility, "instance " + inst.instance_id + " has no pool");
  std::vector<UserRecord> records;
  records.reserve(inst.pool.size());
  for (const auto& id : inst.pool) {
    const UserRecord* rec = inst.find_record(id);
    if (!rec) raise(Errc::schema_violation, "pool id not in history: " + id);
    records.push_back(*rec);
  }
  return records;
}

std::optional<VectorStore> try_load_vectors(const RunConfig& config) {
  if (!std::filesystem::exists(config.vectors_path())) return std::nullopt;
  return load_vector_store(config.vectors_path());
}

Retriever make_pool_retriever(const RunConfig& config, Gateway& gateway,
                              const PersuasionInstance& inst,
                              const std::optional<VectorStore>& vectors) {
  std::vector<UserRecord> records = pool_records(inst);
  if (vectors) {
    bool covered = true;
    for (const auto& rec : records) {
      if (!vectors->by_id.count(rec.record_id)) {
        covered = false;
        break;
      }
    }
    if (covered) return Retriever(std::move(records), *vectors, gateway, config.embedder);
  }
  return Retriever(std::move(records), gateway, config.embedder);
}

}  // namespace

// ---------------------------------------------------------------------------
// Steps

IngestOutcome step_ingest(const RunConfig& config) {
  IngestOutcome outcome;
  Corpus corpus = ingest(config.threads_path, config.histories_path, &outcome.report,
                         config.malformed_tolerance);
  corpus = filter_instances(std::move(corpus), config.min_history);
  if (corpus.instances.empty())
    raise(Errc::empty_corpus, "no instance survived filtering");
  outcome.instances = corpus.instances.size();
  for (const auto& inst : corpus.instances) outcome.records += inst.full_history.size();
  save_corpus(corpus, config.corpus_path());

  ojson report;
  report["instances"] = outcome.instances;
  report["records"] = outcome.records;
  report["total_lines"] = outcome.report.total_lines;
  report["malformed_lines"] = outcome.report.malformed_lines;
  report["dropped_records"] = outcome.report.dropped_records;
  report["orphan_records"] = outcome.report.orphan_records;
  ojson issues = ojson::array();
  for (const auto& issue : outcome.report.issues)
    issues.push_back(ojson{{"file", issue.file}, {"line", issue.line_no}, {"reason", issue.reason}});
  report["issues"] = std::move(issues);
  write_file_atomic(config.out_dir + "/ingest_report.json", report.dump(2) + "\n");
  return outcome;
}

SplitAssignment step_split(const RunConfig& config) {
  Corpus corpus = load_corpus(config.corpus_path());
  SplitAssignment splits = split_corpus(corpus, config.ratios, config.seed);
  save_splits(splits, config.splits_path());
  return splits;
}

void step_pool(const RunConfig& config, Gateway& gateway) {
  Corpus corpus = load_corpus(config.corpus_path());
  SplitAssignment splits = load_splits(config.splits_path());

  std::vector<std::map<std::string, std::vector<std::string>>> partial(corpus.instances.size());
  parallel_for(corpus.instances.size(), config.workers, [&](std::size_t i) {
    const PersuasionInstance& inst = corpus.instances[i];
    auto split_it = splits.assignment.find(inst.instance_id);
    bool is_test = split_it != splits.assignment.end() && split_it->second == Split::test;
    std::vector<std::string> pool;
    if (is_test && !config.subsample_test) {
      // Recency cap instead of the hybrid subsampling.
      std::vector<const UserRecord*> sorted;
      sorted.reserve(inst.full_history.size());
      for (const auto& rec : inst.full_history) sorted.push_back(&rec);
      std::sort(sorted.begin(), sorted.end(), [](const UserRecord* a, const UserRecord* b) {
        if (a->created_at != b->created_at) return a->created_at > b->created_at;
        return a->record_id < b->record_id;
      });
      for (std::size_t r = 0; r < std::min(config.pool_limit, sorted.size()); ++r)
        pool.push_back(sorted[r]->record_id);
    } else {
      Retriever retriever(inst.full_history, gateway, config.embedder);
      pool = build_pool(inst, retriever, config.pool_limit);
    }
    partial[i][inst.instance_id] = std::move(pool);
  });

  std::map<std::string, std::vector<std::string>> pools;
  for (auto& chunk : partial)
    for (auto& [id, pool] : chunk) pools[id] = std::move(pool);
  save_pools(pools, config.pools_path());
}

std::size_t step_index(const RunConfig& config, Gateway& gateway) {
  Corpus corpus = load_prepared_corpus(config, true);
  VectorStore store;
  std::vector<std::string> texts;
  std::vector<std::string> ids;
  for (const auto& inst : corpus.instances) {
    for (const auto& record_id : inst.pool) {
      if (store.by_id.count(record_id)) continue;
      const UserRecord* rec = inst.find_record(record_id);
      if (!rec) raise(Errc::schema_violation, "pool id not in history: " + record_id);
      // reserve slot order now, fill after the batched embed call
      store.by_id[record_id] = ids.size();
      ids.push_back(record_id);
      texts.push_back(rec->text);
    }
  }
  if (ids.empty()) raise(Errc::empty_input, "no pooled records to index");
  store.by_id.clear();
  auto vectors = gateway.embed(config.embedder, texts);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    // persisted vectors are unit-norm; backends are not required to be
    double norm = 0.0;
    for (float v : vectors[i]) norm += static_cast<double>(v) * v;
    if (norm > 0.0) {
      float inv = static_cast<float>(1.0 / std::sqrt(norm));
      for (float& v : vectors[i]) v *= inv;
    }
    store.add(ids[i], vectors[i]);
  }
  save_vector_store(store, config.vectors_path());
  return store.size();
}

void step_score_records(const RunConfig& config, Gateway& gateway, Split split,
                        std::vector<InstanceFailure>* failures) {
  Corpus corpus = load_prepared_corpus(config, true);
  SplitAssignment splits = load_splits(config.splits_path());
  auto instances = split_instances(corpus, splits, split);

  std::vector<UtilityTable> tables(instances.size());
  std::vector<InstanceFailure> failed(instances.size());
  parallel_for(instances.size(), config.workers, [&](std::size_t i) {
    const PersuasionInstance& inst = *instances[i];
    try {
      tables[i] = score_records(gateway, config.predictor, config.profiler, inst, inst.pool,
                                config.utility, config.utility_f1_mode, config.seed, 1);
    } catch (const std::exception& e) {
      failed[i] = {inst.instance_id, e.what()};
    }
  });

  std::vector<UtilityTable> kept;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    if (!failed[i].instance_id.empty()) {
      log_warn("utility scoring failed for " + failed[i].instance_id + ": " + failed[i].error);
      if (failures) failures->push_back(failed[i]);
      continue;
    }
    kept.push_back(std::move(tables[i]));
  }
  save_utility_tables(kept, config.utility_path(split));
}

namespace {

// Sampled record groups for profiler preference construction: a seeded
// shuffle of the pool chunked to group_size, first groups_per_post chunks.
std::vector<std::vector<std::string>> preference_groups(const RunConfig& config,
                                                        const PersuasionInstance& inst) {
  std::vector<std::string> shuffled = inst.pool;
  seeded_shuffle(shuffled,
                 stable_hash(config.seed, std::string_view("pref-groups"),
                             std::string_view(inst.instance_id)));
  std::vector<std::vector<std::string>> groups;
  std::size_t group_size = static_cast<std::size_t>(std::max(1, config.profiler_group_size));
  for (std::size_t start = 0; start < shuffled.size() &&
                              groups.size() < static_cast<std::size_t>(config.groups_per_post);
       start += group_size) {
    std::size_t stop = std::min(shuffled.size(), start + group_size);
    groups.emplace_back(shuffled.begin() + start, shuffled.begin() + stop);
  }
  return groups;
}

std::vector<PreferencePair> profiler_pairs_for_instance(const RunConfig& config,
                                                        Gateway& gateway,
                                                        const PersuasionInstance& inst) {
  std::vector<PreferencePair> all_pairs;
  auto groups = preference_groups(config, inst);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<UserRecord> group_records;
    std::vector<std::string> group_texts;
    for (const auto& record_id : groups[g]) {
      const UserRecord* rec = inst.find_record(record_id);
      if (!rec) raise(Errc::schema_violation, "pool id not in history: " + record_id);
      group_records.push_back(*rec);
      group_texts.push_back(rec->text);
    }
    // mask to 48 bits so base_seed + sample_index cannot overflow
    std::int64_t base_seed = static_cast<std::int64_t>(
        stable_hash(config.seed, std::string_view("prof-cand"),
                    std::string_view(inst.instance_id), static_cast<std::uint64_t>(g)) &
        0xffffffffffffull);
    auto profiles = sample_profiles(gateway, config.profiler, inst.instance_id, inst.post_text,
                                    group_records, config.profiler_candidates,
                                    config.profiler_candidate_temperature, base_seed);
    std::vector<std::pair<Profile, ProfileScore>> scored;
    scored.reserve(profiles.size());
    for (auto& profile : profiles) {
      ProfileScore score =
          score_profile(gateway, config.predictor, profile, inst, config.utility_f1_mode);
      scored.emplace_back(std::move(profile), std::move(score));
    }
    auto pairs =
        build_profiler_pairs(scored, config.profiler_pref_k, config.profiler_pref_delta);
    prompts::Rendered rendered =
        prompts::profiler(inst.post_text, prompts::passages_block(group_texts));
    for (auto& pair : pairs) {
      pair.context.post_text = inst.post_text;
      pair.context.prompt_system = rendered.system;
      pair.context.prompt_user = rendered.user;
      all_pairs.push_back(std::move(pair));
    }
  }
  return all_pairs;
}

std::vector<PreferencePair> querygen_pairs_for_instance(const RunConfig& config,
                                                        Gateway& gateway,
                                                        const PersuasionInstance& inst,
                                                        const UtilityTable& utility,
                                                        const std::optional<VectorStore>& vectors) {
  std::string question = generate_stage1_question(gateway, config.querygen, inst.post_text);
  std::int64_t base_seed = static_cast<std::int64_t>(
      stable_hash(config.seed, std::string_view("query-cand"),
                  std::string_view(inst.instance_id)) &
      0xffffffffffffull);
  auto candidates =
      generate_stage2_queries(gateway, config.querygen, inst.instance_id, inst.post_text,
                              question, config.querygen_candidates,
                              config.querygen_candidate_temperature, base_seed);

  Retriever retriever = make_pool_retriever(config, gateway, inst, vectors);
  std::vector<std::pair<QueryCandidate, double>> scored;
  scored.reserve(candidates.size());
  for (auto& candidate : candidates) {
    double score = score_query_candidate(candidate, retriever, utility, config.k,
                                         config.querygen_hybrid_scoring, config.pool_weight);
    scored.emplace_back(std::move(candidate), score);
  }
  auto pairs = build_query_pairs(scored, config.querygen_pref);
  prompts::Rendered rendered = prompts::stage2_query(inst.post_text, question);
  for (auto& pair : pairs) {
    pair.context.post_text = inst.post_text;
    pair.context.prompt_system = rendered.system;
    pair.context.prompt_user = rendered.user;
  }
  return pairs;
}

}  // namespace

ExportManifest step_build_prefs(const RunConfig& config, Gateway& gateway,
                                PreferencePair::Kind kind,
                                std::vector<InstanceFailure>* failures) {
  Corpus corpus = load_prepared_corpus(config, true);
  SplitAssignment splits = load_splits(config.splits_path());
  auto instances = split_instances(corpus, splits, Split::train);

  std::map<std::string, UtilityTable> utility_by_instance;
  if (kind == PreferencePair::Kind::querygen) {
    const std::string utility_file = config.utility_path(Split::train);
    if (!std::filesystem::exists(utility_file))
      raise(Errc::missing_utility, utility_file + " not found; run score-records first");
    for (auto& table : load_utility_tables(utility_file))
      utility_by_instance[table.instance_id] = std::move(table);
  }
  std::optional<VectorStore> vectors = try_load_vectors(config);

  std::vector<std::vector<PreferencePair>> per_instance(instances.size());
  std::vector<InstanceFailure> failed(instances.size());
  parallel_for(instances.size(), config.workers, [&](std::size_t i) {
    const PersuasionInstance& inst = *instances[i];
    try {
      if (kind == PreferencePair::Kind::profiler) {
        per_instance[i] = profiler_pairs_for_instance(config, gateway, inst);
      } else {
        auto it = utility_by_instance.find(inst.instance_id);
        if (it == utility_by_instance.end())
          raise(Errc::missing_utility, "no utility table for " + inst.instance_id);
        per_instance[i] = querygen_pairs_for_instance(config, gateway, inst, it->second, vectors);
      }
    } catch (const std::exception& e) {
      failed[i] = {inst.instance_id, e.what()};
    }
  });

  std::vector<PreferencePair> pairs;
  for (std::size_t i = 0; i < per_instance.size(); ++i) {
    if (!failed[i].instance_id.empty()) {
      log_warn("preference construction failed for " + failed[i].instance_id + ": " +
               failed[i].error);
      if (failures) failures->push_back(failed[i]);
      continue;
    }
    for (auto& pair : per_instance[i]) pairs.push_back(std::move(pair));
  }

  const bool profiler_kind = kind == PreferencePair::Kind::profiler;
  ojson config_echo =
      profiler_kind
          ? ojson{{"k", config.profiler_pref_k},
                  {"delta", config.profiler_pref_delta},
                  {"groups_per_post", config.groups_per_post},
                  {"group_size", config.profiler_group_size},
                  {"n_candidates", config.profiler_candidates},
                  {"temperature", config.profiler_candidate_temperature},
                  {"f1_mode", f1_mode_name(config.utility_f1_mode)}}
          : ojson{{"pos_threshold", config.querygen_pref.pos_threshold},
                  {"neg_threshold", config.querygen_pref.neg_threshold},
                  {"min_margin", config.querygen_pref.min_margin},
                  {"max_pairs_per_post", config.querygen_pref.max_pairs_per_post},
                  {"n_candidates", config.querygen_candidates},
                  {"temperature", config.querygen_candidate_temperature},
                  {"scoring_retrieval", config.querygen_hybrid_scoring ? "hybrid" : "dense"}};
  return export_dpo(pairs, config.prefs_dir(kind),
                    profiler_kind ? "prefs_profiler.jsonl" : "prefs_querygen.jsonl",
                    profiler_kind ? config.training_meta_profiler_json.empty()
                                        ? kDefaultProfilerTrainingMeta
                                        : config.training_meta_profiler_json
                                  : config.training_meta_querygen_json.empty()
                                        ? kDefaultQuerygenTrainingMeta
                                        : config.training_meta_querygen_json,
                    config_echo.dump());
}

// ---------------------------------------------------------------------------
// run_inference

InferenceOutcome run_inference(const RunConfig& config, Gateway& gateway, Split split) {
  Corpus corpus = load_prepared_corpus(config, true);
  SplitAssignment splits = load_splits(config.splits_path());
  auto instances = split_instances(corpus, splits, split);
  std::optional<VectorStore> vectors = try_load_vectors(config);

  struct InstanceResult {
    bool ok = false;
    std::string error;
    std::string query_text;
    std::vector<std::string> retrieved;
    std::string profile_text;
    struct CommentResult {
      std::string comment_id;
      int pred = 0;
      int label = 0;
      std::optional<double> yes_score;
    };
    std::vector<CommentResult> comments;
  };
  std::vector<InstanceResult> results(instances.size());

  parallel_for(instances.size(), config.workers, [&](std::size_t i) {
    const PersuasionInstance& inst = *instances[i];
    InstanceResult& result = results[i];
    try {
      PredictContext context = PredictContext::plain();
      if (config.context != PredictContext::Kind::none) {
        Retriever retriever = make_pool_retriever(config, gateway, inst, vectors);
        RetrieveOpts opts;
        opts.k = config.k;
        opts.hyde_backend = config.querygen;
        opts.random_seed = stable_hash(config.seed, std::string_view("infer-random"),
                                       std::string_view(inst.instance_id));
        if (config.strategy == QueryStrategy::generated) {
          result.query_text = inference_query(gateway, config.querygen,
                                              config.trained_querygen, inst.post_text);
          opts.query_text = result.query_text;
        }
        Ranking ranking = retrieve(config.strategy, inst, retriever, gateway, opts);
        result.retrieved = ranking.ids();
        if (!ranking.query_text.empty()) result.query_text = ranking.query_text;

        std::vector<UserRecord> top_records;
        std::vector<std::string> top_texts;
        for (const auto& record_id : result.retrieved) {
          const UserRecord* rec = inst.find_record(record_id);
          if (!rec) raise(Errc::schema_violation, "retrieved id not in history: " + record_id);
          top_records.push_back(*rec);
          top_texts.push_back(rec->text);
        }
        if (config.context == PredictContext::Kind::profile) {
          Profile profile = generate_profile(gateway, config.profiler, inst.instance_id,
                                             inst.post_text, top_records, 0.0);
          result.profile_text = profile.text;
          context = PredictContext::with_profile(profile.text);
        } else {
          context = PredictContext::with_history(top_texts);
        }
      }

      ScoreOpts score;
      score.enabled = config.score_mode;
      score.n_score = config.n_score;
      for (const auto& comment : inst.comments) {
        Verdict verdict =
            gateway.predict_view_change(config.predictor, inst.post_text, comment.text, context,
                                        score);
        InstanceResult::CommentResult cr;
        cr.comment_id = comment.comment_id;
        cr.pred = verdict.value == Verdict::Value::view_changed ? 1 : 0;
        cr.label = comment.label;
        cr.yes_score = verdict.yes_score;
        result.comments.push_back(std::move(cr));
      }
      result.ok = true;
    } catch (const std::exception& e) {
      result.error = e.what();
    }
  });

  InferenceOutcome outcome;
  outcome.n_instances = instances.size();

  std::vector<int> preds, labels;
  std::vector<double> scores;
  std::ostringstream lines;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const PersuasionInstance& inst = *instances[i];
    const InstanceResult& result = results[i];
    if (!result.ok) {
      outcome.failures.push_back({inst.instance_id, result.error});
      continue;
    }
    ojson line;
    line["instance_id"] = inst.instance_id;
    line["strategy"] = strategy_name(config.strategy);
    if (!result.query_text.empty()) line["query"] = result.query_text;
    line["retrieved"] = result.retrieved;
    if (!result.profile_text.empty()) line["profile"] = result.profile_text;
    ojson comments = ojson::array();
    for (const auto& cr : result.comments) {
      preds.push_back(cr.pred);
      labels.push_back(cr.label);
      scores.push_back(cr.yes_score.value_or(static_cast<double>(cr.pred)));
      ojson cj;
      cj["comment_id"] = cr.comment_id;
      cj["pred"] = cr.pred;
      cj["label"] = cr.label;
      if (cr.yes_score) cj["yes_score"] = *cr.yes_score;
      comments.push_back(std::move(cj));
    }
    line["comments"] = std::move(comments);
    lines << line.dump() << "\n";
  }
  write_file_atomic(config.predictions_path(split), lines.str());

  EndToEndCell cell;
  cell.predictor = config.predictor.model_name;
  cell.strategy = strategy_name(config.strategy);
  cell.profiler = config.profiler.model_name;
  cell.context = config.context == PredictContext::Kind::profile
                     ? "profile"
                     : (config.context == PredictContext::Kind::history ? "history" : "none");
  cell.n = static_cast<int>(preds.size());
  cell.failures = static_cast<int>(outcome.failures.size());
  if (!preds.empty()) {
    cell.f1_positive = f1(preds, labels, F1Mode::positive);
    cell.f1_macro = f1(preds, labels, F1Mode::macro);
    bool both_classes = false;
    for (std::size_t i = 1; i < labels.size() && !both_classes; ++i)
      both_classes = labels[i] != labels[0];
    cell.auc = both_classes ? roc_auc(scores, labels) : 0.5;
  }
  outcome.report.end_to_end.push_back(cell);
  save_report(outcome.report, config.report_path(split, "e2e"));
  return outcome;
}

// ---------------------------------------------------------------------------
// run_build_training_data

double TrainingDataOutcome::failure_rate() const {
  if (n_instances == 0) return 0.0;
  std::set<std::string> distinct;
  for (const auto& failure : failures) distinct.insert(failure.instance_id);
  return static_cast<double>(distinct.size()) / static_cast<double>(n_instances);
}

TrainingDataOutcome run_build_training_data(const RunConfig& config, Gateway& gateway) {
  TrainingDataOutcome outcome;
  outcome.n_instances = load_splits(config.splits_path()).count(Split::train);
  // (d) profiler preferences
  outcome.profiler =
      step_build_prefs(config, gateway, PreferencePair::Kind::profiler, &outcome.failures);
  // (e) record-level utility scoring over the train split
  step_score_records(config, gateway, Split::train, &outcome.failures);
  outcome.utility_instances = load_utility_tables(config.utility_path(Split::train)).size();
  // (f) query-generator preferences, gated on (e)'s output file
  outcome.querygen =
      step_build_prefs(config, gateway, PreferencePair::Kind::querygen, &outcome.failures);
  return outcome;
}

// ---------------------------------------------------------------------------
// run_retrieval_eval

MetricReport run_retrieval_eval(const RunConfig& config, Gateway& gateway, Split split) {
  Corpus corpus = load_prepared_corpus(config, true);
  SplitAssignment splits = load_splits(config.splits_path());
  auto instances = split_instances(corpus, splits, split);
  std::optional<VectorStore> vectors = try_load_vectors(config);

  const std::string utility_file = config.utility_path(split);
  if (!std::filesystem::exists(utility_file))
    raise(Errc::missing_utility, utility_file + " not found; run score-records first");
  std::map<std::string, UtilityTable> utility_by_instance;
  for (auto& table : load_utility_tables(utility_file))
    utility_by_instance[table.instance_id] = std::move(table);

  struct StrategyAccumulator {
    double ncg_sum = 0.0;
    double ndcg_sum = 0.0;
    int n = 0;
  };

  std::vector<QueryStrategy> fixed_strategies = {QueryStrategy::lexical_post,
                                                 QueryStrategy::dense_post, QueryStrategy::hyde,
                                                 QueryStrategy::generated};

  // per-instance partials, reduced sequentially afterwards so the float sums
  // do not depend on thread completion order
  std::vector<std::map<std::string, StrategyAccumulator>> partials(instances.size());
  parallel_for(instances.size(), config.workers, [&](std::size_t i) {
    const PersuasionInstance& inst = *instances[i];
    auto utility_it = utility_by_instance.find(inst.instance_id);
    if (utility_it == utility_by_instance.end())
      raise(Errc::missing_utility, "no utility table for " + inst.instance_id);
    auto relevance = utility_it->second.utility_map();

    Retriever retriever = make_pool_retriever(config, gateway, inst, vectors);
    std::map<std::string, StrategyAccumulator>& local = partials[i];

    for (QueryStrategy strategy : fixed_strategies) {
      RetrieveOpts opts;
      opts.k = config.k;
      opts.hyde_backend = config.querygen;
      if (strategy == QueryStrategy::generated) {
        opts.query_text =
            inference_query(gateway, config.querygen, config.trained_querygen, inst.post_text);
      }
      Ranking ranking = retrieve(strategy, inst, retriever, gateway, opts);
      auto ids = ranking.ids(config.k);
      StrategyAccumulator& acc = local[strategy_name(strategy)];
      acc.ncg_sum += ncg_at_k(ids, relevance, config.k);
      acc.ndcg_sum += ndcg_at_k(ids, relevance, config.k);
      acc.n += 1;
    }

    for (int run = 0; run < config.eval_random_runs; ++run) {
      RetrieveOpts opts;
      opts.k = config.k;
      opts.random_seed = stable_hash(config.seed, std::string_view("eval-random"), run,
                                     std::string_view(inst.instance_id));
      Ranking ranking = retrieve(QueryStrategy::random, inst, retriever, gateway, opts);
      auto ids = ranking.ids(config.k);
      StrategyAccumulator& acc = local["random"];
      acc.ncg_sum += ncg_at_k(ids, relevance, config.k);
      acc.ndcg_sum += ndcg_at_k(ids, relevance, config.k);
      acc.n += 1;
    }
  });

  std::map<std::string, StrategyAccumulator> accumulators;
  for (const auto& local : partials) {
    for (const auto& [name, acc] : local) {
      StrategyAccumulator& total = accumulators[name];
      total.ncg_sum += acc.ncg_sum;
      total.ndcg_sum += acc.ndcg_sum;
      total.n += acc.n;
    }
  }

  MetricReport report;
  for (const auto& [name, acc] : accumulators) {
    RetrievalStrategyResult result;
    result.mean_ncg_at_5 = acc.n > 0 ? acc.ncg_sum / acc.n : 0.0;
    result.mean_ndcg_at_5 = acc.n > 0 ? acc.ndcg_sum / acc.n : 0.0;
    result.runs = name == "random" ? config.eval_random_runs : 1;
    result.n_instances = static_cast<int>(instances.size());
    report.retrieval[name] = result;
  }
  save_report(report, config.report_path(split, "retrieval"));
  return report;
}

// ---------------------------------------------------------------------------
// step_report

MetricReport step_report(const RunConfig& config,
                         const std::vector<std::pair<std::string, std::string>>&
                             agreement_utility_files) {
  MetricReport merged;
  for (Split split : {Split::train, Split::validation, Split::test}) {
    std::string retrieval_path = config.report_path(split, "retrieval");
    if (std::filesystem::exists(retrieval_path)) {
      MetricReport part = load_report(retrieval_path);
      for (const auto& [name, result] : part.retrieval)
        merged.retrieval[std::string(split_name(split)) + "/" + name] = result;
    }
    std::string e2e_path = config.report_path(split, "e2e");
    if (std::filesystem::exists(e2e_path)) {
      MetricReport part = load_report(e2e_path);
      for (const auto& cell : part.end_to_end) merged.end_to_end.push_back(cell);
    }
  }

  // Pairwise agreement between two predictors' utility tables: mean top-5
  // overlap and mean per-instance Spearman rho over shared instances.
  if (agreement_utility_files.size() == 2) {
    const auto& [label_a, path_a] = agreement_utility_files[0];
    const auto& [label_b, path_b] = agreement_utility_files[1];
    std::map<std::string, UtilityTable> a_tables, b_tables;
    for (auto& table : load_utility_tables(path_a)) a_tables[table.instance_id] = std::move(table);
    for (auto& table : load_utility_tables(path_b)) b_tables[table.instance_id] = std::move(table);
    AgreementEntry entry;
    entry.a = label_a;
    entry.b = label_b;
    double overlap_sum = 0.0, rho_sum = 0.0;
    int n = 0, rho_n = 0;
    for (const auto& [instance_id, table_a] : a_tables) {
      auto it = b_tables.find(instance_id);
      if (it == b_tables.end()) continue;
      auto map_a = table_a.utility_map();
      auto map_b = it->second.utility_map();
      if (map_a.size() != map_b.size() || map_a.size() < 5) continue;
      overlap_sum += topk_overlap(map_a, map_b, 5);
      ++n;
      std::vector<double> va, vb;
      for (const auto& record_id : table_a.pool_order) {
        va.push_back(map_a.at(record_id));
        vb.push_back(map_b.at(record_id));
      }
      try {
        rho_sum += spearman_rho(va, vb);
        ++rho_n;
      } catch (const Error& e) {
        if (e.code() != Errc::zero_variance) throw;
      }
    }
    entry.topk_overlap = n > 0 ? overlap_sum / n : 0.0;
    entry.spearman_rho = rho_n > 0 ? rho_sum / rho_n : 0.0;
    entry.n_instances = n;
    merged.agreement.push_back(entry);
  }

  save_report(merged, config.out_dir + "/report.json");
  write_file_atomic(config.out_dir + "/report_retrieval.csv", merged.retrieval_csv());
  write_file_atomic(config.out_dir + "/report_e2e.csv", merged.end_to_end_csv());
  return merged;
}

}  // namespace persuade
