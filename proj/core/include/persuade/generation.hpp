#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "persuade/corpus.hpp"
#include "persuade/gateway.hpp"

namespace persuade {

// A generated textual user profile bound to the record group and sampling
// parameters that produced it.
struct Profile {
  std::string profile_id;
  std::string instance_id;
  std::vector<std::string> record_ids;  // the group, in prompt order
  std::string text;
  double temperature = 0.0;
  int sample_index = 0;
};

struct QueryCandidate {
  std::string candidate_id;
  std::string instance_id;
  std::string stage1_question;
  std::string text;  // single-sentence retrieval query
  int sample_index = 0;
};

// Fills the profiler prompt with the post and the numbered record group and
// returns the completion as a Profile.
Profile generate_profile(Gateway& gateway, const BackendConfig& profiler,
                         const std::string& instance_id, const std::string& post,
                         const std::vector<UserRecord>& records, double temperature,
                         std::optional<std::int64_t> seed = {}, int sample_index = 0);

// n candidate profiles over one record group, distinct consecutive seeds
// (base_seed + sample_index). Deterministic under mock/oracle backends.
std::vector<Profile> sample_profiles(Gateway& gateway, const BackendConfig& profiler,
                                     const std::string& instance_id, const std::string& post,
                                     const std::vector<UserRecord>& group, int n = 16,
                                     double temperature = 0.7, std::int64_t base_seed = 0);

// Stage-1 user-focused question at temperature 0. Completions missing a
// terminal '?' are kept with a warning.
std::string generate_stage1_question(Gateway& gateway, const BackendConfig& querygen,
                                     const std::string& post);

std::vector<QueryCandidate> generate_stage2_queries(Gateway& gateway,
                                                    const BackendConfig& querygen,
                                                    const std::string& instance_id,
                                                    const std::string& post,
                                                    const std::string& question, int n = 16,
                                                    double temperature = 0.8,
                                                    std::int64_t base_seed = 0);

// Inference-time query. With a trained query generator configured, one
// temperature-0 completion against it; otherwise composes stage 1 + a single
// greedy stage-2 completion.
std::string inference_query(Gateway& gateway, const BackendConfig& querygen,
                            const std::optional<BackendConfig>& trained_querygen,
                            const std::string& post);

}  // namespace persuade
