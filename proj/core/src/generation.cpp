#include "persuade/generation.hpp"

#include <algorithm>
#include <sstream>

#include "persuade/errors.hpp"
#include "persuade/hashutil.hpp"
#include "persuade/io.hpp"
#include "persuade/prompts.hpp"

namespace persuade {

namespace {

std::string group_key(const std::vector<std::string>& record_ids) {
  HashSeq seq;
  seq.add(std::string_view("group"));
  for (const auto& id : record_ids) seq.add(std::string_view(id));
  return hex64(seq.digest()).substr(0, 8);
}

std::string one_line(std::string text) {
  std::string trimmed = trim(text);
  std::string out;
  out.reserve(trimmed.size());
  bool last_space = false;
  for (char c : trimmed) {
    if (c == '\n' || c == '\r' || c == '\t') c = ' ';
    if (c == ' ' && last_space) continue;
    last_space = (c == ' ');
    out.push_back(c);
  }
  return out;
}

}  // namespace

Profile generate_profile(Gateway& gateway, const BackendConfig& profiler,
                         const std::string& instance_id, const std::string& post,
                         const std::vector<UserRecord>& records, double temperature,
                         std::optional<std::int64_t> seed, int sample_index) {
  if (records.empty()) raise(Errc::empty_input, "profile needs at least one record");
  if (trim(post).empty()) raise(Errc::empty_input, "profile needs a non-empty post");

  std::vector<std::string> texts;
  std::vector<std::string> ids;
  texts.reserve(records.size());
  for (const auto& rec : records) {
    texts.push_back(rec.text);
    ids.push_back(rec.record_id);
  }
  prompts::Rendered rendered = prompts::profiler(post, prompts::passages_block(texts));

  ChatParams params;
  params.temperature = temperature;
  params.max_tokens = 512;
  params.seed = seed;
  params.system = rendered.system;
  params.user = rendered.user;
  std::string completion = gateway.chat(profiler, params).text;
  if (trim(completion).empty()) raise(Errc::empty_profile, "profiler returned a blank completion");

  Profile profile;
  profile.instance_id = instance_id;
  profile.record_ids = std::move(ids);
  profile.text = std::move(completion);
  profile.temperature = temperature;
  profile.sample_index = sample_index;
  profile.profile_id = instance_id + ":p:" + group_key(profile.record_ids) + ":" +
                       std::to_string(sample_index);
  return profile;
}

std::vector<Profile> sample_profiles(Gateway& gateway, const BackendConfig& profiler,
                                     const std::string& instance_id, const std::string& post,
                                     const std::vector<UserRecord>& group, int n,
                                     double temperature, std::int64_t base_seed) {
  if (n < 2) raise(Errc::bad_config, "candidate sampling needs n >= 2");
  std::vector<Profile> profiles;
  profiles.reserve(n);
  for (int i = 0; i < n; ++i) {
    profiles.push_back(generate_profile(gateway, profiler, instance_id, post, group,
                                        temperature, base_seed + i, i));
  }
  return profiles;
}

std::string generate_stage1_question(Gateway& gateway, const BackendConfig& querygen,
                                     const std::string& post) {
  if (trim(post).empty()) raise(Errc::empty_input, "stage-1 needs a non-empty post");
  prompts::Rendered rendered = prompts::stage1_question(post);
  ChatParams params;
  params.temperature = 0.0;
  params.max_tokens = 128;
  params.seed = 0;
  params.system = rendered.system;
  params.user = rendered.user;
  std::string question = one_line(gateway.chat(querygen, params).text);
  if (question.empty() || question.back() != '?') {
    log_warn("stage-1 completion is not a question: \"" + question + "\"");
  }
  return question;
}

std::vector<QueryCandidate> generate_stage2_queries(Gateway& gateway,
                                                    const BackendConfig& querygen,
                                                    const std::string& instance_id,
                                                    const std::string& post,
                                                    const std::string& question, int n,
                                                    double temperature,
                                                    std::int64_t base_seed) {
  if (trim(question).empty()) raise(Errc::empty_input, "stage-2 needs a question");
  prompts::Rendered rendered = prompts::stage2_query(post, question);
  std::vector<QueryCandidate> candidates;
  candidates.reserve(n);
  for (int i = 0; i < n; ++i) {
    ChatParams params;
    params.temperature = temperature;
    params.max_tokens = 128;
    params.seed = base_seed + i;
    params.system = rendered.system;
    params.user = rendered.user;
    QueryCandidate candidate;
    candidate.instance_id = instance_id;
    candidate.stage1_question = question;
    candidate.text = one_line(gateway.chat(querygen, params).text);
    candidate.sample_index = i;
    candidate.candidate_id = instance_id + ":q:" + std::to_string(i);
    candidates.push_back(std::move(candidate));
  }
  return candidates;
}

std::string inference_query(Gateway& gateway, const BackendConfig& querygen,
                            const std::optional<BackendConfig>& trained_querygen,
                            const std::string& post) {
  if (trim(post).empty()) raise(Errc::empty_input, "query generation needs a non-empty post");
  if (trained_querygen) {
    // The trained model maps the bare post to the final query in one call.
    prompts::Rendered rendered = prompts::stage1_question(post);
    ChatParams params;
    params.temperature = 0.0;
    params.max_tokens = 128;
    params.seed = 0;
    params.system = rendered.system;
    params.user = rendered.user;
    return one_line(gateway.chat(*trained_querygen, params).text);
  }
  std::string question = generate_stage1_question(gateway, querygen, post);
  prompts::Rendered rendered = prompts::stage2_query(post, question);
  ChatParams params;
  params.temperature = 0.0;
  params.max_tokens = 128;
  params.seed = 0;
  params.system = rendered.system;
  params.user = rendered.user;
  return one_line(gateway.chat(querygen, params).text);
}

}  // namespace persuade
