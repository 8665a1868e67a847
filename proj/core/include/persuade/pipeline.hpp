#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "persuade/corpus.hpp"
#include "persuade/evalkit.hpp"
#include "persuade/gateway.hpp"
#include "persuade/preference.hpp"
#include "persuade/retrieval.hpp"
#include "persuade/utility.hpp"

namespace persuade {

// One declarative file drives every command; env vars only carry API keys.
struct RunConfig {
  std::string threads_path;
  std::string histories_path;
  std::string out_dir = "out";
  int min_history = 15;
  double malformed_tolerance = 0.10;

  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  std::uint64_t seed = 17;

  std::size_t pool_limit = 100;
  double pool_weight = 0.5;
  FusionRule pool_fusion = FusionRule::minmax_weighted;
  // When false, test-split pools skip the hybrid subsampling and keep the
  // most recent pool_limit records instead.
  bool subsample_test = false;

  BackendConfig predictor;
  BackendConfig profiler;
  BackendConfig querygen;
  BackendConfig embedder;
  std::optional<BackendConfig> trained_querygen;

  QueryStrategy strategy = QueryStrategy::generated;
  std::size_t k = 5;
  PredictContext::Kind context = PredictContext::Kind::profile;
  F1Mode f1_mode = F1Mode::positive;
  bool score_mode = true;
  int n_score = 1;

  UtilityParams utility;
  F1Mode utility_f1_mode = F1Mode::macro;

  int profiler_pref_k = 4;
  double profiler_pref_delta = 0.05;
  int groups_per_post = 2;
  int profiler_group_size = 5;
  int profiler_candidates = 16;
  double profiler_candidate_temperature = 0.7;

  QueryPrefConfig querygen_pref;
  int querygen_candidates = 16;
  double querygen_candidate_temperature = 0.8;
  bool querygen_hybrid_scoring = false;

  int workers = 4;
  int eval_random_runs = 10;

  std::string training_meta_profiler_json;
  std::string training_meta_querygen_json;

  static RunConfig load(const std::string& path);
  static RunConfig from_json_text(const std::string& text);
  std::string to_json() const;

  // Derived output locations.
  std::string corpus_path() const { return out_dir + "/corpus.jsonl"; }
  std::string splits_path() const { return out_dir + "/splits.json"; }
  std::string pools_path() const { return out_dir + "/pools.json"; }
  std::string vectors_path() const { return out_dir + "/vectors.bin"; }
  std::string split_dir(Split split) const { return out_dir + "/" + split_name(split); }
  std::string utility_path(Split split) const { return split_dir(split) + "/utility.jsonl"; }
  std::string prefs_dir(PreferencePair::Kind kind) const;
  std::string predictions_path(Split split) const {
    return split_dir(split) + "/predictions.jsonl";
  }
  std::string report_path(Split split, const std::string& which) const {
    return split_dir(split) + "/report_" + which + ".json";
  }
};

struct InstanceFailure {
  std::string instance_id;
  std::string error;
};

struct IngestOutcome {
  std::size_t instances = 0;
  std::size_t records = 0;
  IngestReport report;
};

// Step commands mirroring the CLI; each writes its output files under
// out_dir and returns what the next step needs.
IngestOutcome step_ingest(const RunConfig& config);
SplitAssignment step_split(const RunConfig& config);
void step_pool(const RunConfig& config, Gateway& gateway);
std::size_t step_index(const RunConfig& config, Gateway& gateway);
void step_score_records(const RunConfig& config, Gateway& gateway, Split split,
                        std::vector<InstanceFailure>* failures = nullptr);
ExportManifest step_build_prefs(const RunConfig& config, Gateway& gateway,
                                PreferencePair::Kind kind,
                                std::vector<InstanceFailure>* failures = nullptr);

struct InferenceOutcome {
  MetricReport report;
  std::size_t n_instances = 0;
  std::vector<InstanceFailure> failures;

  double failure_rate() const {
    return n_instances == 0 ? 0.0
                            : static_cast<double>(failures.size()) /
                                  static_cast<double>(n_instances);
  }
};

// Three-stage inference (retrieve, profile, predict) over one split,
// aggregated into an end-to-end report cell.
InferenceOutcome run_inference(const RunConfig& config, Gateway& gateway, Split split);

struct TrainingDataOutcome {
  ExportManifest profiler;
  ExportManifest querygen;
  std::size_t utility_instances = 0;
  std::size_t n_instances = 0;  // train-split size
  std::vector<InstanceFailure> failures;

  double failure_rate() const;  // distinct failed instances / n_instances
};

// Stages (d) profiler preferences, (e) record utility scoring, (f) query
// generator preferences, in that order; (f) consumes (e)'s utility file.
TrainingDataOutcome run_build_training_data(const RunConfig& config, Gateway& gateway);

// Table-1-shaped sweep: random x N, lexical_post, dense_post, hyde,
// generated, scored by NCG@5 / NDCG@5 against precomputed utilities.
MetricReport run_retrieval_eval(const RunConfig& config, Gateway& gateway, Split split);

// Merges per-split eval reports (and optionally a utility-table agreement
// comparison) into out_dir/report.json.
MetricReport step_report(const RunConfig& config,
                         const std::vector<std::pair<std::string, std::string>>&
                             agreement_utility_files = {});

// pools.json helpers.
void save_pools(const std::map<std::string, std::vector<std::string>>& pools,
                const std::string& path);
std::map<std::string, std::vector<std::string>> load_pools(const std::string& path);
void apply_pools(Corpus& corpus,
                 const std::map<std::string, std::vector<std::string>>& pools);

}  // namespace persuade
