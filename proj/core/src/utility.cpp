#include "persuade/utility.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "persuade/concurrency.hpp"
#include "persuade/errors.hpp"
#include "persuade/hashutil.hpp"
#include "persuade/io.hpp"

namespace persuade {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

ProfileScore score_profile(Gateway& gateway, const BackendConfig& predictor,
                           const Profile& profile, const PersuasionInstance& instance,
                           F1Mode mode) {
  if (instance.comments.empty()) raise(Errc::empty_input, "instance has no comments");
  ProfileScore score;
  score.profile_id = profile.profile_id;
  PredictContext context = PredictContext::with_profile(profile.text);
  for (const auto& comment : instance.comments) {
    try {
      Verdict verdict =
          gateway.predict_view_change(predictor, instance.post_text, comment.text, context);
      int pred = verdict.value == Verdict::Value::view_changed ? 1 : 0;
      score.confusion.add(pred, comment.label);
      ++score.n_comments;
    } catch (const Error& e) {
      if (e.code() != Errc::unparseable_verdict) throw;
      ++score.failures;
    }
  }
  score.f1 = score.n_comments > 0 ? f1_from_confusion(score.confusion, mode) : 0.0;
  return score;
}

std::vector<std::vector<std::vector<std::string>>> partition_pool(
    const std::vector<std::string>& pool, int group_size, int repeats, std::uint64_t seed) {
  if (pool.empty()) raise(Errc::empty_input, "cannot partition an empty pool");
  if (group_size < 1 || repeats < 1) raise(Errc::bad_config, "group_size and repeats must be >= 1");
  std::vector<std::vector<std::vector<std::string>>> partitions;
  partitions.reserve(repeats);
  for (int repeat = 0; repeat < repeats; ++repeat) {
    std::vector<std::string> shuffled = pool;
    seeded_shuffle(shuffled, stable_hash(std::string_view("partition"), seed, repeat));
    std::vector<std::vector<std::string>> groups;
    for (std::size_t start = 0; start < shuffled.size();
         start += static_cast<std::size_t>(group_size)) {
      std::size_t stop = std::min(shuffled.size(), start + static_cast<std::size_t>(group_size));
      groups.emplace_back(shuffled.begin() + start, shuffled.begin() + stop);
    }
    partitions.push_back(std::move(groups));
  }
  return partitions;
}

const RecordUtility& UtilityTable::at(const std::string& record_id) const {
  auto it = records.find(record_id);
  if (it == records.end()) raise(Errc::missing_utility, "no utility for record " + record_id);
  return it->second;
}

std::unordered_map<std::string, double> UtilityTable::recompute_from_provenance() const {
  std::unordered_map<std::string, double> out;
  for (const auto& [record_id, entry] : records) {
    double sum = 0.0;
    int n = 0;
    for (const auto& profile_id : entry.profile_ids) {
      auto it = profiles.find(profile_id);
      if (it == profiles.end())
        raise(Errc::missing_utility, "provenance missing profile " + profile_id);
      sum += it->second.f1;
      ++n;
    }
    out[record_id] = n > 0 ? sum / static_cast<double>(n) : 0.0;
  }
  return out;
}

std::unordered_map<std::string, double> UtilityTable::utility_map() const {
  std::unordered_map<std::string, double> out;
  out.reserve(records.size());
  for (const auto& [record_id, entry] : records) out[record_id] = entry.utility;
  return out;
}

UtilityTable score_records(Gateway& gateway, const BackendConfig& predictor,
                           const BackendConfig& profiler, const PersuasionInstance& instance,
                           const std::vector<std::string>& pool, const UtilityParams& params,
                           F1Mode mode, std::uint64_t master_seed, int workers) {
  if (pool.empty()) raise(Errc::empty_input, "empty pool");

  UtilityTable table;
  table.instance_id = instance.instance_id;
  table.params = params;
  table.pool_order = pool;

  std::uint64_t instance_seed = stable_hash(master_seed, std::string_view("utility"),
                                            std::string_view(instance.instance_id));
  auto partitions = partition_pool(pool, params.group_size, params.repeats, instance_seed);

  struct Task {
    int repeat;
    int group_index;
    int sample_index;
    const std::vector<std::string>* group;
  };
  std::vector<Task> tasks;
  for (int repeat = 0; repeat < params.repeats; ++repeat) {
    const auto& groups = partitions[repeat];
    for (std::size_t g = 0; g < groups.size(); ++g) {
      for (int j = 0; j < params.profiles_per_group; ++j) {
        tasks.push_back({repeat, static_cast<int>(g), j, &groups[g]});
      }
    }
  }

  struct Outcome {
    Profile profile;
    ProfileScore score;
    bool ok = false;
    std::string error;
  };
  std::vector<Outcome> outcomes(tasks.size());

  parallel_for(tasks.size(), workers, [&](std::size_t t) {
    const Task& task = tasks[t];
    std::vector<UserRecord> group_records;
    group_records.reserve(task.group->size());
    for (const auto& record_id : *task.group) {
      const UserRecord* rec = instance.find_record(record_id);
      if (!rec) raise(Errc::missing_utility, "pool record not in history: " + record_id);
      group_records.push_back(*rec);
    }
    std::int64_t seed = static_cast<std::int64_t>(
        stable_hash(instance_seed, task.repeat, task.group_index, task.sample_index) &
        0xffffffffffffull);
    Outcome& outcome = outcomes[t];
    try {
      outcome.profile = generate_profile(gateway, profiler, instance.instance_id,
                                         instance.post_text, group_records, params.temperature,
                                         seed, task.sample_index);
      // Tie the id to (repeat, group, sample) so provenance keys are unique.
      outcome.profile.profile_id = instance.instance_id + ":u:r" + std::to_string(task.repeat) +
                                   ":g" + std::to_string(task.group_index) + ":s" +
                                   std::to_string(task.sample_index);
      outcome.score = score_profile(gateway, predictor, outcome.profile, instance, mode);
      outcome.score.profile_id = outcome.profile.profile_id;
      outcome.ok = true;
    } catch (const std::exception& e) {
      outcome.error = e.what();
    }
  });

  for (const auto& record_id : pool) table.records[record_id] = RecordUtility{};

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const Task& task = tasks[t];
    const Outcome& outcome = outcomes[t];
    if (!outcome.ok) {
      log_warn("profile generation failed for " + instance.instance_id + " repeat " +
               std::to_string(task.repeat) + " group " + std::to_string(task.group_index) +
               ": " + outcome.error);
      continue;
    }
    ProfileProvenance prov;
    prov.record_ids = *task.group;
    prov.f1 = outcome.score.f1;
    prov.n_comments = outcome.score.n_comments;
    prov.confusion = outcome.score.confusion;
    prov.failures = outcome.score.failures;
    prov.repeat = task.repeat;
    prov.group_index = task.group_index;
    prov.sample_index = task.sample_index;
    table.profiles[outcome.profile.profile_id] = std::move(prov);
    for (const auto& record_id : *task.group) {
      RecordUtility& entry = table.records[record_id];
      entry.profile_ids.push_back(outcome.profile.profile_id);
    }
  }

  for (auto& [record_id, entry] : table.records) {
    entry.n_profiles = static_cast<int>(entry.profile_ids.size());
    double sum = 0.0;
    for (const auto& profile_id : entry.profile_ids) sum += table.profiles.at(profile_id).f1;
    entry.utility = entry.n_profiles > 0 ? sum / static_cast<double>(entry.n_profiles) : 0.0;
  }
  return table;
}

// ---------------------------------------------------------------------------
// utility.jsonl serialization

std::string utility_table_to_json(const UtilityTable& table) {
  ojson root;
  root["instance_id"] = table.instance_id;
  root["params"] = ojson{{"group_size", table.params.group_size},
                         {"repeats", table.params.repeats},
                         {"profiles_per_group", table.params.profiles_per_group},
                         {"temperature", table.params.temperature}};
  ojson records = ojson::object();
  for (const auto& record_id : table.pool_order) {
    const RecordUtility& entry = table.records.at(record_id);
    records[record_id] = ojson{{"utility", entry.utility},
                               {"n_profiles", entry.n_profiles},
                               {"profile_ids", entry.profile_ids}};
  }
  root["records"] = std::move(records);
  ojson profiles = ojson::object();
  std::vector<std::string> profile_ids;
  profile_ids.reserve(table.profiles.size());
  for (const auto& [profile_id, _] : table.profiles) profile_ids.push_back(profile_id);
  std::sort(profile_ids.begin(), profile_ids.end());
  for (const auto& profile_id : profile_ids) {
    const ProfileProvenance& prov = table.profiles.at(profile_id);
    profiles[profile_id] =
        ojson{{"record_ids", prov.record_ids},
              {"f1", prov.f1},
              {"n_comments", prov.n_comments},
              {"confusion", {prov.confusion.tp, prov.confusion.fp, prov.confusion.fn,
                             prov.confusion.tn}},
              {"failures", prov.failures},
              {"repeat", prov.repeat},
              {"group_index", prov.group_index},
              {"sample_index", prov.sample_index}};
  }
  root["profiles"] = std::move(profiles);
  return root.dump();
}

UtilityTable utility_table_from_json(const std::string& line) {
  // ordered parse keeps pool_order identical to the writer's record order
  ojson root;
  try {
    root = ojson::parse(line);
  } catch (const std::exception& e) {
    raise(Errc::schema_violation, std::string("bad utility line: ") + e.what());
  }
  UtilityTable table;
  table.instance_id = root.at("instance_id").get<std::string>();
  const json& params = root.at("params");
  table.params.group_size = params.value("group_size", 5);
  table.params.repeats = params.value("repeats", 3);
  table.params.profiles_per_group = params.value("profiles_per_group", 3);
  table.params.temperature = params.value("temperature", 0.7);
  for (const auto& [record_id, obj] : root.at("records").items()) {
    RecordUtility entry;
    entry.utility = obj.at("utility").get<double>();
    entry.n_profiles = obj.at("n_profiles").get<int>();
    entry.profile_ids = obj.value("profile_ids", std::vector<std::string>{});
    table.pool_order.push_back(record_id);
    table.records[record_id] = std::move(entry);
  }
  const ojson profiles_obj = root.value("profiles", ojson::object());
  for (const auto& [profile_id, obj] : profiles_obj.items()) {
    ProfileProvenance prov;
    prov.record_ids = obj.value("record_ids", std::vector<std::string>{});
    prov.f1 = obj.at("f1").get<double>();
    prov.n_comments = obj.value("n_comments", 0);
    if (obj.contains("confusion")) {
      auto c = obj["confusion"].get<std::vector<std::int64_t>>();
      if (c.size() == 4) prov.confusion = Confusion{c[0], c[1], c[2], c[3]};
    }
    prov.failures = obj.value("failures", 0);
    prov.repeat = obj.value("repeat", 0);
    prov.group_index = obj.value("group_index", 0);
    prov.sample_index = obj.value("sample_index", 0);
    table.profiles[profile_id] = std::move(prov);
  }
  return table;
}

void save_utility_tables(const std::vector<UtilityTable>& tables, const std::string& path) {
  std::ostringstream out;
  for (const auto& table : tables) out << utility_table_to_json(table) << "\n";
  write_file_atomic(path, out.str());
}

std::vector<UtilityTable> load_utility_tables(const std::string& path) {
  std::vector<UtilityTable> tables;
  for_each_line(path, [&](std::size_t, std::string_view line) {
    tables.push_back(utility_table_from_json(std::string(line)));
  });
  return tables;
}

}  // namespace persuade
