#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "persuade/errors.hpp"
#include "persuade/io.hpp"
#include "persuade/pipeline.hpp"
#include "persuade/synthetic.hpp"

namespace {

constexpr double kFailureRateLimit = 0.05;

persuade::RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed,
                                std::optional<int> workers) {
  persuade::RunConfig config = persuade::RunConfig::load(path);
  if (seed) config.seed = *seed;
  if (workers) config.workers = *workers;
  return config;
}

int exit_code_for_failures(std::size_t failed, std::size_t total) {
  if (total == 0) return 0;
  double rate = static_cast<double>(failed) / static_cast<double>(total);
  if (rate > kFailureRateLimit) {
    std::cerr << "failure rate " << rate << " exceeds " << kFailureRateLimit << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"persuade: retrieval-augmented user profiling pipeline for view-change prediction"};
  app.require_subcommand(1);

  std::string config_path = "config.json";
  std::optional<std::uint64_t> seed_override;
  std::optional<int> workers_override;
  app.add_option("--config", config_path, "Path to the run configuration file");
  app.add_option("--seed", seed_override, "Override the master seed");
  app.add_option("--workers", workers_override, "Override the worker count");

  // worldgen
  auto* worldgen = app.add_subcommand("worldgen", "Generate a synthetic oracle world");
  persuade::WorldSpec world_spec;
  std::string world_out = "world";
  bool world_write_config = true;
  worldgen->add_option("--out", world_out, "Output directory");
  worldgen->add_option("--world-seed", world_spec.seed, "World seed");
  worldgen->add_option("--users", world_spec.n_users, "Number of users");
  worldgen->add_option("--records", world_spec.records_per_user, "Records per user");
  worldgen->add_option("--leaking", world_spec.leaking_per_user, "Attribute-leaking records per user");
  worldgen->add_option("--attrs", world_spec.attrs_per_user, "Latent attributes per user");
  worldgen->add_option("--deltas", world_spec.deltas_per_instance, "Delta comments per instance");
  worldgen->add_option("--nondeltas", world_spec.nondeltas_per_instance,
                       "Non-delta comments per instance");
  worldgen->add_option("--poison", world_spec.poison_per_user,
                       "Records leaking a foreign attribute per user");
  bool world_skip_config = false;
  worldgen->add_flag("--no-config", world_skip_config, "Skip writing a ready-to-run config.json");

  auto* ingest_cmd = app.add_subcommand("ingest", "Ingest and filter threads/histories");
  auto* split_cmd = app.add_subcommand("split", "Assign train/validation/test splits");
  auto* pool_cmd = app.add_subcommand("pool", "Build per-instance candidate record pools");
  auto* index_cmd = app.add_subcommand("index", "Embed pooled records into vectors.bin");

  auto* score_cmd = app.add_subcommand("score-records", "Monte-Carlo record utility scoring");
  std::string score_split = "train";
  score_cmd->add_option("--split", score_split, "Split to score (train/validation/test)");

  auto* prefs_cmd = app.add_subcommand("build-prefs", "Construct DPO preference datasets");
  std::string prefs_kind;
  prefs_cmd->add_option("--kind", prefs_kind, "profiler or querygen")->required();

  auto* eval_ret_cmd = app.add_subcommand("eval-retrieval", "Query-strategy retrieval evaluation");
  std::string eval_ret_split = "validation";
  eval_ret_cmd->add_option("--split", eval_ret_split, "Split to evaluate");

  auto* eval_e2e_cmd = app.add_subcommand("eval-e2e", "End-to-end view-change prediction");
  std::string eval_e2e_split = "test";
  eval_e2e_cmd->add_option("--split", eval_e2e_split, "Split to evaluate");

  auto* train_cmd =
      app.add_subcommand("build-training-data", "Run stages d-f (prefs + utility) in order");

  auto* report_cmd = app.add_subcommand("report", "Merge eval outputs into report.json");
  std::string utility_a, utility_b, label_a = "a", label_b = "b";
  report_cmd->add_option("--utility-a", utility_a, "First utility.jsonl for agreement");
  report_cmd->add_option("--utility-b", utility_b, "Second utility.jsonl for agreement");
  report_cmd->add_option("--label-a", label_a, "Label for the first table");
  report_cmd->add_option("--label-b", label_b, "Label for the second table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (worldgen->parsed()) {
      persuade::SyntheticWorld world = persuade::make_world(world_spec);
      persuade::write_world_files(world, world_out);
      world_write_config = !world_skip_config;
      if (world_write_config) {
        persuade::RunConfig config;
        config.threads_path = world_out + "/threads.jsonl";
        config.histories_path = world_out + "/histories.jsonl";
        config.out_dir = world_out + "/out";
        config.min_history = std::min(15, world_spec.records_per_user);
        persuade::BackendConfig oracle = persuade::oracle_backend(world_out + "/world.json");
        config.predictor = oracle;
        config.profiler = oracle;
        config.querygen = oracle;
        config.embedder = oracle;
        persuade::write_file_atomic(world_out + "/config.json", config.to_json());
      }
      std::cout << "wrote world with " << world.corpus.instances.size() << " instances to "
                << world_out << "\n";
      return 0;
    }

    persuade::RunConfig config = load_config(config_path, seed_override, workers_override);
    persuade::Gateway gateway;

    if (ingest_cmd->parsed()) {
      persuade::IngestOutcome outcome = persuade::step_ingest(config);
      std::cout << "ingested " << outcome.instances << " instances (" << outcome.records
                << " history records), " << outcome.report.malformed_lines
                << " malformed lines\n";
      return 0;
    }
    if (split_cmd->parsed()) {
      persuade::SplitAssignment splits = persuade::step_split(config);
      std::cout << "split " << splits.assignment.size() << " instances: "
                << splits.count(persuade::Split::train) << "/"
                << splits.count(persuade::Split::validation) << "/"
                << splits.count(persuade::Split::test) << "\n";
      return 0;
    }
    if (pool_cmd->parsed()) {
      persuade::step_pool(config, gateway);
      std::cout << "wrote " << config.pools_path() << "\n";
      return 0;
    }
    if (index_cmd->parsed()) {
      std::size_t count = persuade::step_index(config, gateway);
      std::cout << "indexed " << count << " records into " << config.vectors_path() << "\n";
      return 0;
    }
    if (score_cmd->parsed()) {
      auto split = persuade::parse_split(score_split);
      if (!split) throw persuade::Error(persuade::Errc::bad_config, "unknown split " + score_split);
      std::vector<persuade::InstanceFailure> failures;
      persuade::step_score_records(config, gateway, *split, &failures);
      std::size_t total = persuade::load_splits(config.splits_path()).count(*split);
      std::cout << "wrote " << config.utility_path(*split) << " (" << failures.size()
                << " failures)\n";
      return exit_code_for_failures(failures.size(), total);
    }
    if (prefs_cmd->parsed()) {
      persuade::PreferencePair::Kind kind;
      if (prefs_kind == "profiler") kind = persuade::PreferencePair::Kind::profiler;
      else if (prefs_kind == "querygen") kind = persuade::PreferencePair::Kind::querygen;
      else throw persuade::Error(persuade::Errc::bad_config, "--kind must be profiler|querygen");
      std::vector<persuade::InstanceFailure> failures;
      persuade::ExportManifest manifest = persuade::step_build_prefs(config, gateway, kind, &failures);
      std::size_t total = persuade::load_splits(config.splits_path()).count(persuade::Split::train);
      std::cout << "exported " << manifest.count << " pairs to " << manifest.pairs_path
                << " (" << failures.size() << " failures)\n";
      return exit_code_for_failures(failures.size(), total);
    }
    if (train_cmd->parsed()) {
      persuade::TrainingDataOutcome outcome = persuade::run_build_training_data(config, gateway);
      std::cout << "profiler pairs: " << outcome.profiler.count
                << ", utility instances: " << outcome.utility_instances
                << ", querygen pairs: " << outcome.querygen.count << "\n";
      if (outcome.failure_rate() > kFailureRateLimit) {
        std::cerr << "failure rate " << outcome.failure_rate() << " exceeds "
                  << kFailureRateLimit << "\n";
        return 2;
      }
      return 0;
    }
    if (eval_ret_cmd->parsed()) {
      auto split = persuade::parse_split(eval_ret_split);
      if (!split)
        throw persuade::Error(persuade::Errc::bad_config, "unknown split " + eval_ret_split);
      persuade::MetricReport report = persuade::run_retrieval_eval(config, gateway, *split);
      for (const auto& [name, result] : report.retrieval) {
        std::printf("%-14s mean NCG@5 %.4f  mean NDCG@5 %.4f\n", name.c_str(),
                    result.mean_ncg_at_5, result.mean_ndcg_at_5);
      }
      return 0;
    }
    if (eval_e2e_cmd->parsed()) {
      auto split = persuade::parse_split(eval_e2e_split);
      if (!split)
        throw persuade::Error(persuade::Errc::bad_config, "unknown split " + eval_e2e_split);
      persuade::InferenceOutcome outcome = persuade::run_inference(config, gateway, *split);
      for (const auto& cell : outcome.report.end_to_end) {
        std::printf("%s | %s | %s: F1(pos) %.4f  F1(macro) %.4f  AUC %.4f  (n=%d)\n",
                    cell.predictor.c_str(), cell.strategy.c_str(), cell.context.c_str(),
                    cell.f1_positive, cell.f1_macro, cell.auc, cell.n);
      }
      return exit_code_for_failures(outcome.failures.size(), outcome.n_instances);
    }
    if (report_cmd->parsed()) {
      std::vector<std::pair<std::string, std::string>> agreement;
      if (!utility_a.empty() && !utility_b.empty()) {
        agreement.emplace_back(label_a, utility_a);
        agreement.emplace_back(label_b, utility_b);
      }
      persuade::MetricReport report = persuade::step_report(config, agreement);
      std::cout << "wrote " << config.out_dir << "/report.json\n";
      for (const auto& entry : report.agreement) {
        std::printf("agreement %s vs %s: top-5 overlap %.3f, spearman %.3f (n=%d)\n",
                    entry.a.c_str(), entry.b.c_str(), entry.topk_overlap, entry.spearman_rho,
                    entry.n_instances);
      }
      return 0;
    }
  } catch (const persuade::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
