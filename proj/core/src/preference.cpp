#include "persuade/preference.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "persuade/errors.hpp"
#include "persuade/evalkit.hpp"
#include "persuade/io.hpp"

namespace persuade {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

std::vector<PreferencePair> build_profiler_pairs(
    const std::vector<std::pair<Profile, ProfileScore>>& scored, int k, double delta) {
  std::vector<PreferencePair> pairs;
  if (scored.size() < 2 || k < 1) return pairs;

  std::vector<std::size_t> order(scored.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scored[a].second.f1 != scored[b].second.f1)
      return scored[a].second.f1 > scored[b].second.f1;
    return scored[a].first.profile_id < scored[b].first.profile_id;
  });

  std::size_t effective_k =
      std::min<std::size_t>(static_cast<std::size_t>(k), scored.size() / 2);
  for (std::size_t i = 0; i < effective_k; ++i) {
    const auto& [win_profile, win_score] = scored[order[i]];
    for (std::size_t j = order.size() - effective_k; j < order.size(); ++j) {
      const auto& [lose_profile, lose_score] = scored[order[j]];
      double margin = win_score.f1 - lose_score.f1;
      if (margin < delta || margin <= 0.0) continue;
      PreferencePair pair;
      pair.kind = PreferencePair::Kind::profiler;
      pair.pair_id = win_profile.profile_id + "|" + lose_profile.profile_id;
      pair.context.instance_id = win_profile.instance_id;
      pair.context.record_ids = win_profile.record_ids;
      pair.chosen = win_profile.text;
      pair.rejected = lose_profile.text;
      pair.chosen_score = win_score.f1;
      pair.rejected_score = lose_score.f1;
      pair.margin = margin;
      pairs.push_back(std::move(pair));
    }
  }
  return pairs;
}

double score_query_candidate(const QueryCandidate& candidate, const Retriever& pool_retriever,
                             const UtilityTable& utility, std::size_t k, bool hybrid,
                             double hybrid_weight) {
  for (const auto& rec : pool_retriever.records()) {
    if (!utility.records.count(rec.record_id))
      raise(Errc::missing_utility, "utility table lacks record " + rec.record_id);
  }
  Ranking ranking = hybrid ? pool_retriever.rank_hybrid(candidate.text, hybrid_weight)
                           : pool_retriever.rank_dense(candidate.text);
  return ndcg_at_k(ranking.ids(k), utility.utility_map(), k);
}

std::vector<PreferencePair> build_query_pairs(
    const std::vector<std::pair<QueryCandidate, double>>& scored,
    const QueryPrefConfig& config) {
  if (config.pos_threshold <= config.neg_threshold)
    raise(Errc::bad_config, "pos_threshold must exceed neg_threshold");
  if (config.max_pairs_per_post < 1) raise(Errc::bad_config, "max_pairs_per_post must be >= 1");

  std::vector<std::size_t> positives, negatives;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    double score = scored[i].second;
    if (score < 0.0 || score > 1.0)
      raise(Errc::bad_config, "candidate score outside [0,1]");
    if (score >= config.pos_threshold) positives.push_back(i);
    if (score <= config.neg_threshold) negatives.push_back(i);
  }

  std::vector<PreferencePair> pairs;
  for (std::size_t i : positives) {
    const auto& [win, win_score] = scored[i];
    for (std::size_t j : negatives) {
      const auto& [lose, lose_score] = scored[j];
      double margin = win_score - lose_score;
      if (margin < config.min_margin || margin <= 0.0) continue;
      PreferencePair pair;
      pair.kind = PreferencePair::Kind::querygen;
      pair.pair_id = win.candidate_id + "|" + lose.candidate_id;
      pair.context.instance_id = win.instance_id;
      pair.context.stage1_question = win.stage1_question;
      pair.chosen = win.text;
      pair.rejected = lose.text;
      pair.chosen_score = win_score;
      pair.rejected_score = lose_score;
      pair.margin = margin;
      pairs.push_back(std::move(pair));
    }
  }

  std::sort(pairs.begin(), pairs.end(), [](const PreferencePair& a, const PreferencePair& b) {
    if (a.margin != b.margin) return a.margin > b.margin;
    return a.pair_id < b.pair_id;
  });
  if (pairs.size() > static_cast<std::size_t>(config.max_pairs_per_post))
    pairs.resize(static_cast<std::size_t>(config.max_pairs_per_post));
  return pairs;
}

ExportManifest export_dpo(const std::vector<PreferencePair>& pairs, const std::string& out_dir,
                          const std::string& filename, const std::string& training_meta_json,
                          const std::string& config_echo_json) {
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    if (pairs[i].kind != pairs[0].kind)
      raise(Errc::bad_config, "export requires pairs of one kind");
  }

  std::ostringstream lines;
  std::set<std::string> texts;
  std::size_t duplicates = 0;
  for (const auto& pair : pairs) {
    for (const std::string* text : {&pair.chosen, &pair.rejected}) {
      if (!texts.insert(*text).second) ++duplicates;
    }
    ojson obj;
    obj["pair_id"] = pair.pair_id;
    obj["kind"] = pair.kind == PreferencePair::Kind::profiler ? "profiler" : "querygen";
    obj["prompt"] = ojson{{"system", pair.context.prompt_system},
                          {"user", pair.context.prompt_user}};
    obj["chosen"] = pair.chosen;
    obj["rejected"] = pair.rejected;
    ojson meta;
    meta["instance_id"] = pair.context.instance_id;
    meta["chosen_score"] = pair.chosen_score;
    meta["rejected_score"] = pair.rejected_score;
    meta["margin"] = pair.margin;
    if (!pair.context.record_ids.empty()) meta["record_ids"] = pair.context.record_ids;
    if (!pair.context.stage1_question.empty())
      meta["stage1_question"] = pair.context.stage1_question;
    obj["metadata"] = std::move(meta);
    lines << obj.dump() << "\n";
  }

  ExportManifest manifest;
  manifest.count = pairs.size();
  manifest.duplicate_texts = duplicates;
  manifest.pairs_path = out_dir + "/" + filename;
  manifest.manifest_path = out_dir + "/manifest.json";
  write_file_atomic(manifest.pairs_path, lines.str());

  if (pairs.empty()) log_warn("exported empty preference dataset to " + manifest.pairs_path);

  ojson manifest_json;
  manifest_json["file"] = filename;
  manifest_json["count"] = manifest.count;
  manifest_json["duplicate_texts"] = manifest.duplicate_texts;
  manifest_json["kind"] =
      pairs.empty() ? "unknown"
                    : (pairs[0].kind == PreferencePair::Kind::profiler ? "profiler" : "querygen");
  try {
    manifest_json["config"] = ojson::parse(config_echo_json);
  } catch (const std::exception& e) {
    raise(Errc::bad_config, std::string("config echo is not valid JSON: ") + e.what());
  }
  try {
    manifest_json["training"] = ojson::parse(training_meta_json);
  } catch (const std::exception& e) {
    raise(Errc::bad_config, std::string("training meta is not valid JSON: ") + e.what());
  }
  write_file_atomic(manifest.manifest_path, manifest_json.dump(2) + "\n");
  return manifest;
}

std::vector<PreferencePair> load_dpo_pairs(const std::string& path) {
  std::vector<PreferencePair> pairs;
  for_each_line(path, [&](std::size_t line_no, std::string_view line) {
    json obj;
    try {
      obj = json::parse(line);
    } catch (const std::exception& e) {
      raise(Errc::schema_violation, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    PreferencePair pair;
    pair.pair_id = obj.value("pair_id", "");
    pair.kind = obj.value("kind", "profiler") == std::string("querygen")
                    ? PreferencePair::Kind::querygen
                    : PreferencePair::Kind::profiler;
    pair.context.prompt_system = obj.at("prompt").value("system", "");
    pair.context.prompt_user = obj.at("prompt").value("user", "");
    pair.chosen = obj.at("chosen").get<std::string>();
    pair.rejected = obj.at("rejected").get<std::string>();
    const json& meta = obj.at("metadata");
    pair.context.instance_id = meta.value("instance_id", "");
    pair.chosen_score = meta.value("chosen_score", 0.0);
    pair.rejected_score = meta.value("rejected_score", 0.0);
    pair.margin = meta.value("margin", 0.0);
    pair.context.record_ids = meta.value("record_ids", std::vector<std::string>{});
    pair.context.stage1_question = meta.value("stage1_question", "");
    pairs.push_back(std::move(pair));
  });
  return pairs;
}

}  // namespace persuade
