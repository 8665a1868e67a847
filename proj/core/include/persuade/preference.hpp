#pragma once

#include <string>
#include <vector>

#include "persuade/generation.hpp"
#include "persuade/retrieval.hpp"
#include "persuade/utility.hpp"

namespace persuade {

struct PairContext {
  std::string instance_id;
  std::string post_text;
  std::vector<std::string> record_ids;  // profiler pairs: the conditioning group
  std::string stage1_question;          // querygen pairs
  std::string prompt_system;            // rendered DPO prompt, filled by the pipeline
  std::string prompt_user;
};

struct PreferencePair {
  enum class Kind { profiler, querygen };
  std::string pair_id;
  Kind kind = Kind::profiler;
  PairContext context;
  std::string chosen;
  std::string rejected;
  double chosen_score = 0.0;
  double rejected_score = 0.0;
  double margin = 0.0;
};

struct QueryPrefConfig {
  double pos_threshold = 0.65;
  double neg_threshold = 0.55;
  double min_margin = 0.10;
  int max_pairs_per_post = 8;
};

// Top-k x bottom-k Cartesian product over the candidates sorted by score
// (ties by profile_id), filtered to margin >= delta. k clamps to n/2.
std::vector<PreferencePair> build_profiler_pairs(
    const std::vector<std::pair<Profile, ProfileScore>>& scored, int k = 4,
    double delta = 0.05);

// NDCG@k of the candidate's dense retrieval over the pool, with record
// utilities as graded relevance.
double score_query_candidate(const QueryCandidate& candidate, const Retriever& pool_retriever,
                             const UtilityTable& utility, std::size_t k = 5,
                             bool hybrid = false, double hybrid_weight = 0.5);

// Positive/negative threshold split, margin filter, then deterministic
// truncation by descending margin (ties by pair_id).
std::vector<PreferencePair> build_query_pairs(
    const std::vector<std::pair<QueryCandidate, double>>& scored, const QueryPrefConfig& config);

struct ExportManifest {
  std::size_t count = 0;
  std::size_t duplicate_texts = 0;  // textually identical chosen/rejected candidates
  std::string pairs_path;
  std::string manifest_path;
};

// Writes one JSON line per pair plus manifest.json next to it. training_meta
// is a JSON object string carried verbatim into the manifest for external
// trainers.
ExportManifest export_dpo(const std::vector<PreferencePair>& pairs, const std::string& out_dir,
                          const std::string& filename,
                          const std::string& training_meta_json = "{}",
                          const std::string& config_echo_json = "{}");

std::vector<PreferencePair> load_dpo_pairs(const std::string& path);

}  // namespace persuade
