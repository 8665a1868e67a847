#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "persuade/corpus.hpp"
#include "persuade/evalkit.hpp"
#include "persuade/gateway.hpp"
#include "persuade/generation.hpp"

namespace persuade {

struct ProfileScore {
  std::string profile_id;
  double f1 = 0.0;
  int n_comments = 0;
  Confusion confusion;
  int failures = 0;  // unparseable verdicts, excluded from the confusion
};

// Predicts every comment of the instance under the profile and scores the
// outcome. Unparseable verdicts are excluded and counted.
ProfileScore score_profile(Gateway& gateway, const BackendConfig& predictor,
                           const Profile& profile, const PersuasionInstance& instance,
                           F1Mode mode = F1Mode::macro);

// Seeded shuffle chunked into groups of group_size per repeat; the final
// short group is kept. Result is [repeat][group][record_id].
std::vector<std::vector<std::vector<std::string>>> partition_pool(
    const std::vector<std::string>& pool, int group_size, int repeats, std::uint64_t seed);

struct UtilityParams {
  int group_size = 5;
  int repeats = 3;
  int profiles_per_group = 3;
  double temperature = 0.7;
};

struct RecordUtility {
  double utility = 0.0;
  int n_profiles = 0;
  std::vector<std::string> profile_ids;  // contributing profiles, in generation order
};

struct ProfileProvenance {
  std::vector<std::string> record_ids;
  double f1 = 0.0;
  int n_comments = 0;
  Confusion confusion;
  int failures = 0;
  int repeat = 0;
  int group_index = 0;
  int sample_index = 0;
};

struct UtilityTable {
  std::string instance_id;
  UtilityParams params;
  std::vector<std::string> pool_order;
  std::unordered_map<std::string, RecordUtility> records;
  std::unordered_map<std::string, ProfileProvenance> profiles;

  const RecordUtility& at(const std::string& record_id) const;
  // Recomputes utilities from stored profile scores; used to check that the
  // table is bit-exactly reproducible from its own provenance.
  std::unordered_map<std::string, double> recompute_from_provenance() const;
  std::unordered_map<std::string, double> utility_map() const;
};

// Full grouping/profiling/scoring sweep. Each pooled record ends up with
// repeats x profiles_per_group contributing profiles (9 with defaults).
UtilityTable score_records(Gateway& gateway, const BackendConfig& predictor,
                           const BackendConfig& profiler, const PersuasionInstance& instance,
                           const std::vector<std::string>& pool, const UtilityParams& params,
                           F1Mode mode, std::uint64_t master_seed, int workers = 1);

// utility.jsonl: one UtilityTable per line, parameters and provenance inline.
std::string utility_table_to_json(const UtilityTable& table);
UtilityTable utility_table_from_json(const std::string& line);
void save_utility_tables(const std::vector<UtilityTable>& tables, const std::string& path);
std::vector<UtilityTable> load_utility_tables(const std::string& path);

}  // namespace persuade
