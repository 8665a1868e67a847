// Acceptance suite: every criterion below runs offline against brute-force
// oracles or synthetic-persuadee worlds and prints one PASS/FAIL line.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "persuade/corpus.hpp"
#include "persuade/evalkit.hpp"
#include "persuade/hashutil.hpp"
#include "persuade/io.hpp"
#include "persuade/pipeline.hpp"
#include "persuade/preference.hpp"
#include "persuade/prompts.hpp"
#include "persuade/retrieval.hpp"
#include "persuade/synthetic.hpp"
#include "persuade/textutil.hpp"
#include "persuade/utility.hpp"

using namespace persuade;

namespace {

struct CheckFailure {
  std::string detail;
};

void require(bool condition, const std::string& detail) {
  if (!condition) throw CheckFailure{detail};
}

void require_close(double got, double want, double tol, const std::string& what) {
  if (!(std::fabs(got - want) <= tol)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << ": got " << got << ", want " << want << " (tol " << tol << ")";
    throw CheckFailure{msg.str()};
  }
}

std::filesystem::path scratch_root() {
  static std::filesystem::path root = [] {
    auto path = std::filesystem::temp_directory_path() /
                ("persuade_acceptance_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
    return path;
  }();
  return root;
}

// ---------------------------------------------------------------------------
// Brute-force metric oracles (independent of the evalkit implementations)

double brute_f1(const std::vector<int>& preds, const std::vector<int>& labels, bool macro) {
  double tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == 1 && labels[i] == 1) tp += 1;
    if (preds[i] == 1 && labels[i] == 0) fp += 1;
    if (preds[i] == 0 && labels[i] == 1) fn += 1;
    if (preds[i] == 0 && labels[i] == 0) tn += 1;
  }
  double pos = (2 * tp + fp + fn) > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
  if (!macro) return pos;
  double neg = (2 * tn + fn + fp) > 0 ? 2 * tn / (2 * tn + fn + fp) : 0.0;
  return (pos + neg) / 2.0;
}

double brute_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

double brute_ndcg(const std::vector<std::string>& ranking,
                  const std::map<std::string, double>& rel, std::size_t k) {
  double dcg = 0.0;
  for (std::size_t i = 0; i < ranking.size() && i < k; ++i)
    dcg += rel.at(ranking[i]) / std::log2(double(i) + 2.0);
  std::vector<double> ideal;
  for (const auto& [_, r] : rel) ideal.push_back(r);
  std::sort(ideal.rbegin(), ideal.rend());
  double idcg = 0.0;
  for (std::size_t i = 0; i < ideal.size() && i < k; ++i)
    idcg += ideal[i] / std::log2(double(i) + 2.0);
  return idcg > 0.0 ? std::min(1.0, dcg / idcg) : 0.0;
}

double brute_ncg(const std::vector<std::string>& ranking,
                 const std::map<std::string, double>& rel, std::size_t k) {
  double cg = 0.0;
  for (std::size_t i = 0; i < ranking.size() && i < k; ++i) cg += rel.at(ranking[i]);
  std::vector<double> ideal;
  for (const auto& [_, r] : rel) ideal.push_back(r);
  std::sort(ideal.rbegin(), ideal.rend());
  double icg = 0.0;
  for (std::size_t i = 0; i < ideal.size() && i < k; ++i) icg += ideal[i];
  return icg > 0.0 ? std::min(1.0, cg / icg) : 0.0;
}

std::vector<double> brute_ranks(const std::vector<double>& values) {
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    double below = 0, ties = 0;
    for (std::size_t j = 0; j < values.size(); ++j) {
      if (values[j] < values[i]) below += 1;
      if (values[j] == values[i]) ties += 1;
    }
    ranks[i] = below + (ties + 1.0) / 2.0;
  }
  return ranks;
}

double brute_spearman(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> ra = brute_ranks(a), rb = brute_ranks(b);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= double(ra.size());
  mb /= double(rb.size());
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

double brute_topk(const std::map<std::string, double>& a, const std::map<std::string, double>& b,
                  std::size_t k) {
  auto top = [&](const std::map<std::string, double>& m) {
    std::vector<std::pair<std::string, double>> items(m.begin(), m.end());
    std::sort(items.begin(), items.end(), [](const auto& x, const auto& y) {
      if (x.second != y.second) return x.second > y.second;
      return x.first < y.first;
    });
    std::set<std::string> out;
    for (std::size_t i = 0; i < k; ++i) out.insert(items[i].first);
    return out;
  };
  std::set<std::string> ta = top(a), tb = top(b);
  double shared = 0;
  for (const auto& id : ta) shared += tb.count(id);
  return shared / double(k);
}

// Quantized random value so ties occur often.
double tie_prone(SplitMix64& rng) { return double(rng.bounded(9)) / 8.0; }

// ---------------------------------------------------------------------------
// Criterion 1: metric oracle equivalence

void criterion_metric_oracles() {
  SplitMix64 rng(11001);
  const double tol = 1e-9;
  for (int iter = 0; iter < 1000; ++iter) {
    std::size_t n = 2 + rng.bounded(11);  // lengths <= 12

    // f1
    std::vector<int> preds, labels;
    for (std::size_t i = 0; i < n; ++i) {
      preds.push_back(int(rng.bounded(2)));
      labels.push_back(int(rng.bounded(2)));
    }
    require_close(f1(preds, labels, F1Mode::positive), brute_f1(preds, labels, false), tol,
                  "f1 positive");
    require_close(f1(preds, labels, F1Mode::macro), brute_f1(preds, labels, true), tol,
                  "f1 macro");

    // auc (needs both classes)
    std::vector<double> scores;
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores.push_back(tie_prone(rng));
      (labels[i] == 1 ? pos : neg) = true;
    }
    if (pos && neg)
      require_close(roc_auc(scores, labels), brute_auc(scores, labels), tol, "roc_auc");

    // ndcg / ncg
    std::map<std::string, double> rel;
    std::unordered_map<std::string, double> rel_u;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
      std::string id = "x" + std::to_string(i);
      double r = tie_prone(rng);
      rel[id] = r;
      rel_u[id] = r;
      ids.push_back(id);
    }
    seeded_shuffle(ids, rng.next());
    std::size_t k = 1 + rng.bounded(n);
    std::vector<std::string> retrieved(ids.begin(), ids.begin() + 1 + rng.bounded(n));
    require_close(ndcg_at_k(retrieved, rel_u, k), brute_ndcg(retrieved, rel, k), tol, "ndcg");
    require_close(ncg_at_k(retrieved, rel_u, k), brute_ncg(retrieved, rel, k), tol, "ncg");

    // spearman (skip zero-variance draws)
    std::vector<double> va, vb;
    for (std::size_t i = 0; i < n; ++i) {
      va.push_back(tie_prone(rng));
      vb.push_back(tie_prone(rng));
    }
    bool var_a = false, var_b = false;
    for (std::size_t i = 1; i < n; ++i) {
      var_a |= va[i] != va[0];
      var_b |= vb[i] != vb[0];
    }
    if (n >= 2 && var_a && var_b)
      require_close(spearman_rho(va, vb), brute_spearman(va, vb), tol, "spearman");

    // topk_overlap
    if (n >= 3) {
      std::map<std::string, double> ma, mb;
      std::unordered_map<std::string, double> ua, ub;
      for (std::size_t i = 0; i < n; ++i) {
        std::string id = "k" + std::to_string(i);
        double sa = tie_prone(rng), sb = tie_prone(rng);
        ma[id] = sa;
        mb[id] = sb;
        ua[id] = sa;
        ub[id] = sb;
      }
      std::size_t kk = 1 + rng.bounded(n - 1);
      require_close(topk_overlap(ua, ub, kk), brute_topk(ma, mb, kk), tol, "topk_overlap");
    }
  }
}

// ---------------------------------------------------------------------------
// Criterion 2: BM25 / cosine / hybrid correctness

void criterion_bm25_cosine_hybrid() {
  // five-document fixture, query "cats dogs"; expectations evaluated by hand
  // from the Okapi formula with k1=1.2, b=0.75, smoothed idf
  std::vector<UserRecord> docs;
  auto rec = [](const char* id, const char* text) {
    UserRecord r;
    r.record_id = id;
    r.author_id = "u";
    r.text = text;
    r.created_at = 1;
    return r;
  };
  docs.push_back(rec("d1", "cats are great pets"));
  docs.push_back(rec("d2", "dogs are loyal and dogs bark"));
  docs.push_back(rec("d3", "cats and dogs can be friends"));
  docs.push_back(rec("d4", "birds sing in the morning"));
  docs.push_back(rec("d5", "cats cats cats everywhere"));
  LexicalIndex index = index_lexical(docs);
  ScoreMap bm25 = score_lexical(index, "cats dogs");
  require_close(bm25.at("d1"), 0.5870258918870851, 1e-9, "bm25 d1");
  require_close(bm25.at("d2"), 1.1396634450760827, 1e-9, "bm25 d2");
  require_close(bm25.at("d3"), 1.3074888755422234, 1e-9, "bm25 d3");
  require_close(bm25.at("d4"), 0.0, 1e-12, "bm25 d4");
  require_close(bm25.at("d5"), 0.8849196280685909, 1e-9, "bm25 d5");

  // cosine against a hand-built store; components chosen to be exactly
  // representable in float32 so the expected ratios are exact
  VectorStore store;
  store.add("a", {1.0f, 0.0f});
  store.add("b", {0.75f, 1.0f});  // norm 1.25, cosine vs e0 = 0.6
  store.add("c", {0.0f, 1.0f});
  ScoreMap cos = score_dense(store, {1.0f, 0.0f});
  require_close(cos.at("a"), 1.0, 1e-9, "cosine a");
  require_close(cos.at("b"), 0.6, 1e-9, "cosine b");
  require_close(cos.at("c"), 0.0, 1e-12, "cosine c");

  // dense scoring equals brute-force cosine on random small stores
  {
    SplitMix64 dense_rng(11004);
    for (int iter = 0; iter < 100; ++iter) {
      std::size_t n = 2 + dense_rng.bounded(6);
      std::size_t dim = 3 + dense_rng.bounded(6);
      VectorStore random_store;
      std::vector<std::vector<float>> rows;
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<float> v(dim);
        for (auto& x : v) x = float(dense_rng.next_double() * 2.0 - 1.0);
        rows.push_back(v);
        random_store.add("v" + std::to_string(i), v);
      }
      std::vector<float> q(dim);
      for (auto& x : q) x = float(dense_rng.next_double() * 2.0 - 1.0);
      ScoreMap got = score_dense(random_store, q);
      for (std::size_t i = 0; i < n; ++i) {
        double dot = 0, nq = 0, nr = 0;
        for (std::size_t d = 0; d < dim; ++d) {
          dot += double(q[d]) * rows[i][d];
          nq += double(q[d]) * q[d];
          nr += double(rows[i][d]) * rows[i][d];
        }
        require_close(got.at("v" + std::to_string(i)), dot / std::sqrt(nq * nr), 1e-9,
                      "dense vs brute cosine");
      }
    }
  }

  // hybrid fixture: hand-evaluated min-max fusion at weight 0.5
  ScoreMap lex{{"r1", 2.0}, {"r2", 8.0}, {"r3", 4.0}, {"r4", 0.0}, {"r5", 6.0}};
  ScoreMap den{{"r1", 0.9}, {"r2", 0.1}, {"r3", 0.5}, {"r4", 0.8}, {"r5", 0.3}};
  Ranking fused = hybrid_rank(lex, den, 0.5);
  require(fused.items[0].record_id == "r1", "hybrid fixture top-1");
  require_close(fused.items[0].score, 0.625, 1e-9, "hybrid top score");
  require_close(fused.items[4].score, 0.4375, 1e-9, "hybrid bottom score");

  // properties on 500 random score-map pairs
  SplitMix64 rng(11002);
  for (int iter = 0; iter < 500; ++iter) {
    std::size_t n = 2 + rng.bounded(10);
    ScoreMap a, b;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
      std::string id = "m" + std::to_string(i);
      ids.push_back(id);
      a[id] = rng.next_double() * 20.0 - 5.0;
      b[id] = rng.next_double();
    }
    Ranking base = hybrid_rank(a, b, 0.5);

    // affine invariance of the order
    double scale = 0.25 + rng.next_double() * 5.0;
    double shift = rng.next_double() * 40.0 - 20.0;
    ScoreMap a_affine;
    for (const auto& [id, s] : a) a_affine[id] = scale * s + shift;
    Ranking transformed = hybrid_rank(a_affine, b, 0.5);
    for (std::size_t i = 0; i < base.items.size(); ++i)
      require(base.items[i].record_id == transformed.items[i].record_id,
              "hybrid affine invariance");

    // monotonicity: dominance in both maps implies fused dominance
    std::map<std::string, double> fused_score;
    for (const auto& item : base.items) fused_score[item.record_id] = item.score;
    for (const auto& x : ids) {
      for (const auto& y : ids) {
        if (a.at(x) >= a.at(y) && b.at(x) >= b.at(y))
          require(fused_score.at(x) >= fused_score.at(y) - 1e-12, "hybrid monotonicity");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Criterion 3: preference construction equivalence

void criterion_preference_equivalence() {
  SplitMix64 rng(11003);

  auto make_profiles = [](const std::vector<double>& f1s) {
    std::vector<std::pair<Profile, ProfileScore>> scored;
    for (std::size_t i = 0; i < f1s.size(); ++i) {
      Profile profile;
      profile.profile_id = "p" + std::string(i < 10 ? "0" : "") + std::to_string(i);
      profile.text = "text" + std::to_string(i);
      ProfileScore score;
      score.f1 = f1s[i];
      scored.emplace_back(profile, score);
    }
    return scored;
  };
  auto make_candidates = [](const std::vector<double>& scores) {
    std::vector<std::pair<QueryCandidate, double>> scored;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      QueryCandidate candidate;
      candidate.candidate_id = "q" + std::string(i < 10 ? "0" : "") + std::to_string(i);
      candidate.text = "query" + std::to_string(i);
      scored.emplace_back(candidate, scores[i]);
    }
    return scored;
  };

  for (int iter = 0; iter < 500; ++iter) {
    std::vector<double> values;
    for (int i = 0; i < 16; ++i)
      values.push_back(rng.bounded(4) == 0 ? 0.5 : rng.next_double());

    // profiler pairs: the default configuration K=4, delta=0.05 plus a
    // random configuration
    for (auto [k, delta] : {std::pair<int, double>{4, 0.05},
                            {1 + int(rng.bounded(6)), rng.next_double() * 0.4}}) {
      auto scored = make_profiles(values);
      auto got = build_profiler_pairs(scored, k, delta);

      // brute force: sort, bucket, enumerate
      std::vector<std::size_t> order(scored.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (scored[x].second.f1 != scored[y].second.f1)
          return scored[x].second.f1 > scored[y].second.f1;
        return scored[x].first.profile_id < scored[y].first.profile_id;
      });
      std::size_t kk = std::min<std::size_t>(k, scored.size() / 2);
      std::set<std::string> expected;
      for (std::size_t i = 0; i < kk; ++i) {
        for (std::size_t j = order.size() - kk; j < order.size(); ++j) {
          double margin = scored[order[i]].second.f1 - scored[order[j]].second.f1;
          if (margin >= delta && margin > 0.0)
            expected.insert(scored[order[i]].first.profile_id + "|" +
                            scored[order[j]].first.profile_id);
        }
      }
      require(got.size() == expected.size(), "profiler pair count");
      for (const auto& pair : got)
        require(expected.count(pair.pair_id) == 1, "unexpected profiler pair " + pair.pair_id);
      for (const auto& pair : got)
        require(pair.chosen_score > pair.rejected_score, "strict chosen > rejected");
    }

    // query pairs: the published threshold configuration plus a random one
    std::vector<QueryPrefConfig> configs(2);
    configs[0] = QueryPrefConfig{0.65, 0.55, 0.10, 8};
    configs[1].neg_threshold = rng.next_double() * 0.5;
    configs[1].pos_threshold = configs[1].neg_threshold + 0.05 + rng.next_double() * 0.4;
    configs[1].min_margin = rng.next_double() * 0.3;
    configs[1].max_pairs_per_post = 1 + int(rng.bounded(20));
    for (const auto& config : configs) {
      auto scored = make_candidates(values);
      auto got = build_query_pairs(scored, config);

      struct BrutePair {
        double margin;
        std::string id;
      };
      std::vector<BrutePair> expected;
      for (std::size_t i = 0; i < scored.size(); ++i) {
        if (scored[i].second < config.pos_threshold) continue;
        for (std::size_t j = 0; j < scored.size(); ++j) {
          if (scored[j].second > config.neg_threshold) continue;
          double margin = scored[i].second - scored[j].second;
          if (margin < config.min_margin || margin <= 0.0) continue;
          expected.push_back(
              {margin, scored[i].first.candidate_id + "|" + scored[j].first.candidate_id});
        }
      }
      std::sort(expected.begin(), expected.end(), [](const BrutePair& x, const BrutePair& y) {
        if (x.margin != y.margin) return x.margin > y.margin;
        return x.id < y.id;
      });
      if (expected.size() > std::size_t(config.max_pairs_per_post))
        expected.resize(std::size_t(config.max_pairs_per_post));
      require(got.size() == expected.size(), "query pair count");
      for (std::size_t i = 0; i < got.size(); ++i)
        require(got[i].pair_id == expected[i].id, "query pair order");
    }
  }
}

// ---------------------------------------------------------------------------
// Oracle-world helpers shared by criteria 4-7

RunConfig world_pipeline(const std::string& tag, const WorldSpec& spec,
                         std::array<double, 3> ratios, Gateway& gateway) {
  std::filesystem::path dir = scratch_root() / tag;
  std::filesystem::create_directories(dir);
  SyntheticWorld world = make_world(spec);
  write_world_files(world, dir.string());

  RunConfig config;
  config.threads_path = (dir / "threads.jsonl").string();
  config.histories_path = (dir / "histories.jsonl").string();
  config.out_dir = (dir / "out").string();
  config.min_history = std::min(15, spec.records_per_user);
  config.ratios = ratios;
  config.seed = 31415;
  config.workers = 4;
  BackendConfig oracle = oracle_backend((dir / "world.json").string());
  config.predictor = oracle;
  config.profiler = oracle;
  config.querygen = oracle;
  config.embedder = oracle;

  step_ingest(config);
  step_split(config);
  step_pool(config, gateway);
  step_index(config, gateway);
  return config;
}

// ---------------------------------------------------------------------------
// Criterion 4: utility-scoring accounting

void criterion_utility_accounting() {
  Gateway gateway;
  WorldSpec spec;
  spec.seed = 77;
  spec.n_users = 2;
  spec.records_per_user = 12;
  spec.leaking_per_user = 2;
  RunConfig config = world_pipeline("accounting", spec, {1.0, 0.0, 0.0}, gateway);
  step_score_records(config, gateway, Split::train);
  auto tables = load_utility_tables(config.utility_path(Split::train));
  require(tables.size() == 2, "expected two utility tables");
  for (const auto& table : tables) {
    require(table.records.size() == 12, "pool coverage");
    for (const auto& [record_id, entry] : table.records) {
      require(entry.n_profiles == 9, record_id + " has n_profiles != 9");
      require(entry.utility >= 0.0 && entry.utility <= 1.0, "utility out of range");
    }
    auto recomputed = table.recompute_from_provenance();
    for (const auto& [record_id, entry] : table.records)
      require(recomputed.at(record_id) == entry.utility, "provenance recompute mismatch");
  }

  // symmetry at |pool| = group_size: one group per repeat, identical scores
  WorldSpec tiny = spec;
  tiny.seed = 78;
  tiny.records_per_user = 5;
  tiny.leaking_per_user = 1;
  RunConfig tiny_config = world_pipeline("accounting5", tiny, {1.0, 0.0, 0.0}, gateway);
  step_score_records(tiny_config, gateway, Split::train);
  for (const auto& table : load_utility_tables(tiny_config.utility_path(Split::train))) {
    double first = table.records.begin()->second.utility;
    for (const auto& [_, entry] : table.records)
      require(entry.utility == first, "|pool|=5 symmetry");
  }
}

// ---------------------------------------------------------------------------
// Criteria 5 and 6: oracle separation and retrieval-eval ordering

WorldSpec acceptance_world(std::uint64_t seed) {
  WorldSpec spec;
  spec.seed = seed;
  spec.n_users = 10;
  spec.records_per_user = 50;
  spec.leaking_per_user = 3;
  spec.attrs_per_user = 2;
  spec.deltas_per_instance = 1;
  spec.nondeltas_per_instance = 2;
  spec.poison_per_user = 0;  // zero-noise worlds
  return spec;
}

void criterion_oracle_separation() {
  int separation_hits = 0;
  int inference_hits = 0;
  const int worlds = 20;
  for (int w = 0; w < worlds; ++w) {
    Gateway gateway;
    RunConfig config = world_pipeline("sep" + std::to_string(w), acceptance_world(1000 + w),
                                      {1.0, 0.0, 0.0}, gateway);
    step_score_records(config, gateway, Split::train);

    OracleWorld world = OracleWorld::load(
        (std::filesystem::path(config.threads_path).parent_path() / "world.json").string());
    double leak_sum = 0.0, other_sum = 0.0;
    int leak_n = 0, other_n = 0;
    for (const auto& table : load_utility_tables(config.utility_path(Split::train))) {
      for (const auto& [record_id, entry] : table.records) {
        bool leaking = !world.records.at(record_id).empty();
        (leaking ? leak_sum : other_sum) += entry.utility;
        (leaking ? leak_n : other_n) += 1;
      }
    }
    require(leak_n == 10 * 3, "expected 30 leaking records");
    if (leak_sum / leak_n > other_sum / other_n) ++separation_hits;

    InferenceOutcome generated = run_inference(config, gateway, Split::train);
    RunConfig plain = config;
    plain.context = PredictContext::Kind::none;
    InferenceOutcome none = run_inference(plain, gateway, Split::train);
    require(generated.failures.empty() && none.failures.empty(), "inference failures");
    if (generated.report.end_to_end[0].f1_positive > none.report.end_to_end[0].f1_positive)
      ++inference_hits;
  }
  require(separation_hits >= 19,
          "utility separation held in only " + std::to_string(separation_hits) + "/20 worlds");
  require(inference_hits >= 18,
          "inference gain held in only " + std::to_string(inference_hits) + "/20 worlds");
}

void criterion_retrieval_eval_ordering() {
  int worlds = 20;
  for (int w = 0; w < worlds; ++w) {
    Gateway gateway;
    RunConfig config = world_pipeline("ret" + std::to_string(w), acceptance_world(2000 + w),
                                      {1.0, 0.0, 0.0}, gateway);
    step_score_records(config, gateway, Split::train);
    MetricReport report = run_retrieval_eval(config, gateway, Split::train);
    double generated = report.retrieval.at("generated").mean_ndcg_at_5;
    double random = report.retrieval.at("random").mean_ndcg_at_5;
    require(report.retrieval.at("random").runs == 10, "random must average 10 runs");
    require(generated > random, "world " + std::to_string(w) + ": generated " +
                                    std::to_string(generated) + " <= random " +
                                    std::to_string(random));
  }
}

// ---------------------------------------------------------------------------
// Criterion 7: determinism of the full training + inference runs

void criterion_determinism() {
  WorldSpec spec;
  spec.seed = 55;
  spec.n_users = 5;
  spec.records_per_user = 15;
  spec.leaking_per_user = 3;
  spec.poison_per_user = 4;

  auto collect = [&](const std::string& tag) {
    Gateway gateway;
    RunConfig config = world_pipeline(tag, spec, {1.0, 0.0, 0.0}, gateway);
    run_build_training_data(config, gateway);
    run_inference(config, gateway, Split::train);
    run_retrieval_eval(config, gateway, Split::train);
    std::map<std::string, std::string> files;
    for (const auto& entry :
         std::filesystem::recursive_directory_iterator(config.out_dir)) {
      if (!entry.is_regular_file()) continue;
      files[std::filesystem::relative(entry.path(), config.out_dir).string()] =
          read_text_file(entry.path().string());
    }
    return files;
  };

  auto a = collect("detA");
  auto b = collect("detB");
  require(a.size() == b.size(), "output file sets differ in size");
  require(!a.empty(), "no output files found");
  for (const auto& [rel, content] : a) {
    require(b.count(rel) == 1, "missing output file " + rel);
    require(content == b.at(rel), "output file differs: " + rel);
  }
}

// ---------------------------------------------------------------------------
// Criterion 8: prompt fidelity against the golden assets

void criterion_prompt_fidelity() {
  auto golden = [](const std::string& name) {
    return read_text_file(std::string(PERSUADE_TEST_DATA_DIR) + "/golden/" + name + ".golden");
  };
  auto check = [&](const prompts::Rendered& rendered, const std::string& name) {
    require(rendered.system == golden(name + ".system"), name + " system text diverges");
    require(rendered.user == golden(name + ".user"), name + " user text diverges");
  };
  check(prompts::predict_with_profile("PROFILE_BODY", "POST_BODY", "COMMENT_BODY"),
        "predict_profile");
  check(prompts::predict_with_history("HISTORY_BODY", "POST_BODY", "COMMENT_BODY"),
        "predict_history");
  check(prompts::predict_plain("POST_BODY", "COMMENT_BODY"), "predict_plain");
  check(prompts::profiler("POST_BODY", "PASSAGES_BODY"), "profiler");
  check(prompts::stage1_question("POST_BODY"), "stage1");
  check(prompts::stage2_query("POST_BODY", "QUESTION_BODY"), "stage2");
}

// ---------------------------------------------------------------------------
// Criterion 9: corpus filtering rules and split counts

void criterion_corpus_filtering() {
  auto make_instance = [](const std::string& id, int history, int deltas, int nondeltas) {
    PersuasionInstance inst;
    inst.instance_id = id;
    inst.user_id = "u-" + id;
    inst.post_text = "post";
    inst.post_created_at = 10'000'000;
    for (int i = 0; i < history; ++i) {
      UserRecord rec;
      rec.record_id = id + "r" + std::to_string(i);
      rec.author_id = inst.user_id;
      rec.text = "text";
      rec.created_at = 1000 + i;
      inst.full_history.push_back(rec);
    }
    for (int i = 0; i < deltas; ++i)
      inst.comments.push_back({id + "d" + std::to_string(i), "c", 1});
    for (int i = 0; i < nondeltas; ++i)
      inst.comments.push_back({id + "n" + std::to_string(i), "c", 0});
    return inst;
  };

  Corpus corpus;
  corpus.instances.push_back(make_instance("short-history", 14, 1, 1));
  corpus.instances.push_back(make_instance("no-nondelta", 30, 2, 0));
  corpus.instances.push_back(make_instance("no-delta", 30, 0, 2));
  corpus.instances.push_back(make_instance("keeper", 15, 1, 1));
  Corpus filtered = filter_instances(corpus);
  require(filtered.instances.size() == 1, "filter kept the wrong instances");
  require(filtered.instances[0].instance_id == "keeper", "filter kept the wrong instance");

  Corpus big;
  for (int i = 0; i < 1676; ++i) {
    PersuasionInstance inst;
    inst.instance_id = "inst" + std::to_string(100000 + i);
    big.instances.push_back(inst);
  }
  SplitAssignment splits = split_corpus(big, {0.8, 0.1, 0.1}, 99);
  auto within = [](std::size_t got, std::size_t want) {
    return got + 1 >= want && got <= want + 1;
  };
  require(within(splits.count(Split::train), 1341),
          "train count " + std::to_string(splits.count(Split::train)));
  require(within(splits.count(Split::validation), 167),
          "validation count " + std::to_string(splits.count(Split::validation)));
  require(within(splits.count(Split::test), 168),
          "test count " + std::to_string(splits.count(Split::test)));
}

struct Criterion {
  const char* name;
  std::function<void()> run;
};

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {"metric-oracle-equivalence", criterion_metric_oracles},
      {"bm25-cosine-hybrid", criterion_bm25_cosine_hybrid},
      {"preference-construction-equivalence", criterion_preference_equivalence},
      {"utility-scoring-accounting", criterion_utility_accounting},
      {"oracle-separation", criterion_oracle_separation},
      {"retrieval-eval-ordering", criterion_retrieval_eval_ordering},
      {"determinism", criterion_determinism},
      {"prompt-fidelity", criterion_prompt_fidelity},
      {"corpus-filtering", criterion_corpus_filtering},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    auto start = std::chrono::steady_clock::now();
    std::string failure;
    try {
      criterion.run();
    } catch (const CheckFailure& f) {
      failure = f.detail;
    } catch (const std::exception& e) {
      failure = std::string("exception: ") + e.what();
    }
    double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (failure.empty()) {
      std::printf("PASS %-38s (%.2fs)\n", criterion.name, seconds);
    } else {
      std::printf("FAIL %-38s (%.2fs): %s\n", criterion.name, seconds, failure.c_str());
      ++failures;
    }
  }

  std::error_code ec;
  std::filesystem::remove_all(scratch_root(), ec);

  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all %zu acceptance criteria passed\n", criteria.size());
  return 0;
}
