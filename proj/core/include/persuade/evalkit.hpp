#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace persuade {

enum class F1Mode { positive, macro };
const char* f1_mode_name(F1Mode mode);

struct Confusion {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

  void add(int pred, int label);
};

// positive: 2TP / (2TP + FP + FN), 0 when the denominator is 0.
// macro: unweighted mean of the per-class F1 values.
double f1_from_confusion(const Confusion& c, F1Mode mode);
double f1(const std::vector<int>& preds, const std::vector<int>& labels, F1Mode mode);

// Mann-Whitney formulation: P(score+ > score-) + 0.5 P(tie) over all
// positive-negative pairs. Ties get half credit so degenerate {0,1} score
// sources remain well-defined.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// DCG with linear gain rel_i / log2(i+1); the ideal ranking is taken over
// the full relevance map. 0 when the ideal DCG is 0. Exponential gain
// (2^rel - 1) available behind the flag.
double ndcg_at_k(const std::vector<std::string>& ranking,
                 const std::unordered_map<std::string, double>& relevance, std::size_t k,
                 bool exponential_gain = false);

// Discount-free variant: sum of top-k retrieved relevances over the ideal
// top-k sum.
double ncg_at_k(const std::vector<std::string>& ranking,
                const std::unordered_map<std::string, double>& relevance, std::size_t k);

// Pearson correlation of fractional ranks (ties share their average rank).
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

// |top-k(a) ∩ top-k(b)| / k with deterministic tie-break (score desc, id asc).
double topk_overlap(const std::unordered_map<std::string, double>& a,
                    const std::unordered_map<std::string, double>& b, std::size_t k = 5);

// Report assembly mirroring the three result-table shapes.
struct RetrievalStrategyResult {
  double mean_ncg_at_5 = 0.0;
  double mean_ndcg_at_5 = 0.0;
  int runs = 1;
  int n_instances = 0;
};

struct EndToEndCell {
  std::string predictor;
  std::string strategy;
  std::string profiler;
  std::string context;
  double f1_positive = 0.0;
  double f1_macro = 0.0;
  double auc = 0.0;
  int n = 0;
  int failures = 0;
};

struct AgreementEntry {
  std::string a;
  std::string b;
  double topk_overlap = 0.0;
  double spearman_rho = 0.0;
  int n_instances = 0;
};

struct MetricReport {
  std::map<std::string, RetrievalStrategyResult> retrieval;
  std::vector<EndToEndCell> end_to_end;
  std::vector<AgreementEntry> agreement;

  std::string to_json(int indent = 2) const;
  std::string retrieval_csv() const;
  std::string end_to_end_csv() const;
  static MetricReport from_json(const std::string& text);
};

void save_report(const MetricReport& report, const std::string& path);
MetricReport load_report(const std::string& path);

}  // namespace persuade
