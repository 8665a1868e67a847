#include "persuade/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "persuade/errors.hpp"
#include "persuade/io.hpp"

namespace persuade {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

const char* f1_mode_name(F1Mode mode) {
  return mode == F1Mode::positive ? "positive" : "macro";
}

void Confusion::add(int pred, int label) {
  if (pred == 1 && label == 1) ++tp;
  else if (pred == 1 && label == 0) ++fp;
  else if (pred == 0 && label == 1) ++fn;
  else ++tn;
}

double f1_from_confusion(const Confusion& c, F1Mode mode) {
  auto binary_f1 = [](std::int64_t tp, std::int64_t fp, std::int64_t fn) {
    std::int64_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  };
  double positive = binary_f1(c.tp, c.fp, c.fn);
  if (mode == F1Mode::positive) return positive;
  double negative = binary_f1(c.tn, c.fn, c.fp);  // class 0: swapped error roles
  return 0.5 * (positive + negative);
}

double f1(const std::vector<int>& preds, const std::vector<int>& labels, F1Mode mode) {
  if (preds.size() != labels.size())
    raise(Errc::length_mismatch, std::to_string(preds.size()) + " preds vs " +
                                     std::to_string(labels.size()) + " labels");
  if (preds.empty()) raise(Errc::length_mismatch, "empty prediction list");
  Confusion c;
  for (std::size_t i = 0; i < preds.size(); ++i) c.add(preds[i], labels[i]);
  return f1_from_confusion(c, mode);
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    raise(Errc::length_mismatch, "scores and labels differ in length");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    (labels[i] == 1 ? pos : neg).push_back(scores[i]);
  }
  if (pos.empty() || neg.empty()) raise(Errc::single_class, "need both classes for AUC");

  // O(n log n): sort negatives, then binary-search counts per positive.
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (double p : pos) {
    auto lo = std::lower_bound(neg.begin(), neg.end(), p);
    auto hi = std::upper_bound(neg.begin(), neg.end(), p);
    wins += static_cast<double>(lo - neg.begin());       // strictly below
    wins += 0.5 * static_cast<double>(hi - lo);          // ties
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

namespace {

double gain(double rel, bool exponential) {
  return exponential ? std::exp2(rel) - 1.0 : rel;
}

std::vector<double> ideal_relevances(const std::unordered_map<std::string, double>& relevance) {
  std::vector<double> values;
  values.reserve(relevance.size());
  for (const auto& [_, rel] : relevance) values.push_back(rel);
  std::sort(values.begin(), values.end(), std::greater<double>());
  return values;
}

double relevance_of(const std::unordered_map<std::string, double>& relevance,
                    const std::string& id) {
  auto it = relevance.find(id);
  if (it == relevance.end()) raise(Errc::missing_relevance, "no relevance for " + id);
  return it->second;
}

}  // namespace

double ndcg_at_k(const std::vector<std::string>& ranking,
                 const std::unordered_map<std::string, double>& relevance, std::size_t k,
                 bool exponential_gain) {
  double dcg = 0.0;
  std::size_t depth = std::min(k, ranking.size());
  for (std::size_t i = 0; i < depth; ++i) {
    dcg += gain(relevance_of(relevance, ranking[i]), exponential_gain) /
           std::log2(static_cast<double>(i) + 2.0);
  }
  double idcg = 0.0;
  std::vector<double> ideal = ideal_relevances(relevance);
  for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) {
    idcg += gain(ideal[i], exponential_gain) / std::log2(static_cast<double>(i) + 2.0);
  }
  // clamp: reordered summation can overshoot 1 by an ulp
  return idcg > 0.0 ? std::min(1.0, dcg / idcg) : 0.0;
}

double ncg_at_k(const std::vector<std::string>& ranking,
                const std::unordered_map<std::string, double>& relevance, std::size_t k) {
  double cg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i)
    cg += relevance_of(relevance, ranking[i]);
  double icg = 0.0;
  std::vector<double> ideal = ideal_relevances(relevance);
  for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) icg += ideal[i];
  return icg > 0.0 ? std::min(1.0, cg / icg) : 0.0;
}

namespace {

// Fractional ranks, ties averaged.
std::vector<double> fractional_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size(), 0.0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) raise(Errc::length_mismatch, "rank inputs differ in length");
  if (a.size() < 2) raise(Errc::length_mismatch, "need at least 2 observations");
  std::vector<double> ra = fractional_ranks(a);
  std::vector<double> rb = fractional_ranks(b);
  double n = static_cast<double>(a.size());
  double mean = (n + 1.0) / 2.0;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    double da = ra[i] - mean;
    double db = rb[i] - mean;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0)
    raise(Errc::zero_variance, "all ranks tied in one input");
  return cov / std::sqrt(var_a * var_b);
}

namespace {

std::vector<std::string> top_k_ids(const std::unordered_map<std::string, double>& scores,
                                   std::size_t k) {
  std::vector<std::pair<std::string, double>> items(scores.begin(), scores.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, items.size()); ++i) out.push_back(items[i].first);
  return out;
}

}  // namespace

double topk_overlap(const std::unordered_map<std::string, double>& a,
                    const std::unordered_map<std::string, double>& b, std::size_t k) {
  if (a.size() != b.size()) raise(Errc::key_set_mismatch, "maps differ in size");
  for (const auto& [id, _] : a)
    if (!b.count(id)) raise(Errc::key_set_mismatch, "id " + id + " missing from second map");
  if (a.size() < k) raise(Errc::bad_config, "fewer keys than k");
  std::vector<std::string> top_a = top_k_ids(a, k);
  std::vector<std::string> top_b = top_k_ids(b, k);
  std::sort(top_b.begin(), top_b.end());
  std::size_t shared = 0;
  for (const auto& id : top_a)
    shared += std::binary_search(top_b.begin(), top_b.end(), id) ? 1 : 0;
  return static_cast<double>(shared) / static_cast<double>(k);
}

// ---------------------------------------------------------------------------
// Report serialization

std::string MetricReport::to_json(int indent) const {
  ojson root;
  ojson strategies = ojson::object();
  for (const auto& [name, result] : retrieval) {
    strategies[name] = ojson{{"mean_ncg_at_5", result.mean_ncg_at_5},
                             {"mean_ndcg_at_5", result.mean_ndcg_at_5},
                             {"runs", result.runs},
                             {"n_instances", result.n_instances}};
  }
  root["retrieval"] = std::move(strategies);
  ojson cells = ojson::array();
  for (const auto& cell : end_to_end) {
    cells.push_back(ojson{{"predictor", cell.predictor},
                          {"strategy", cell.strategy},
                          {"profiler", cell.profiler},
                          {"context", cell.context},
                          {"f1_positive", cell.f1_positive},
                          {"f1_macro", cell.f1_macro},
                          {"auc", cell.auc},
                          {"n", cell.n},
                          {"failures", cell.failures}});
  }
  root["end_to_end"] = std::move(cells);
  ojson pairs = ojson::array();
  for (const auto& entry : agreement) {
    pairs.push_back(ojson{{"a", entry.a},
                          {"b", entry.b},
                          {"topk_overlap", entry.topk_overlap},
                          {"spearman_rho", entry.spearman_rho},
                          {"n_instances", entry.n_instances}});
  }
  root["agreement"] = std::move(pairs);
  return root.dump(indent) + "\n";
}

MetricReport MetricReport::from_json(const std::string& text) {
  json root = json::parse(text);
  MetricReport report;
  if (root.contains("retrieval")) {
    for (const auto& [name, obj] : root["retrieval"].items()) {
      RetrievalStrategyResult result;
      result.mean_ncg_at_5 = obj.value("mean_ncg_at_5", 0.0);
      result.mean_ndcg_at_5 = obj.value("mean_ndcg_at_5", 0.0);
      result.runs = obj.value("runs", 1);
      result.n_instances = obj.value("n_instances", 0);
      report.retrieval[name] = result;
    }
  }
  for (const auto& obj : root.value("end_to_end", json::array())) {
    EndToEndCell cell;
    cell.predictor = obj.value("predictor", "");
    cell.strategy = obj.value("strategy", "");
    cell.profiler = obj.value("profiler", "");
    cell.context = obj.value("context", "");
    cell.f1_positive = obj.value("f1_positive", 0.0);
    cell.f1_macro = obj.value("f1_macro", 0.0);
    cell.auc = obj.value("auc", 0.0);
    cell.n = obj.value("n", 0);
    cell.failures = obj.value("failures", 0);
    report.end_to_end.push_back(std::move(cell));
  }
  for (const auto& obj : root.value("agreement", json::array())) {
    AgreementEntry entry;
    entry.a = obj.value("a", "");
    entry.b = obj.value("b", "");
    entry.topk_overlap = obj.value("topk_overlap", 0.0);
    entry.spearman_rho = obj.value("spearman_rho", 0.0);
    entry.n_instances = obj.value("n_instances", 0);
    report.agreement.push_back(std::move(entry));
  }
  return report;
}

std::string MetricReport::retrieval_csv() const {
  std::ostringstream out;
  out << "strategy,mean_ncg_at_5,mean_ndcg_at_5,runs,n_instances\n";
  for (const auto& [name, result] : retrieval) {
    out << name << "," << result.mean_ncg_at_5 << "," << result.mean_ndcg_at_5 << ","
        << result.runs << "," << result.n_instances << "\n";
  }
  return out.str();
}

std::string MetricReport::end_to_end_csv() const {
  std::ostringstream out;
  out << "predictor,strategy,profiler,context,f1_positive,f1_macro,auc,n,failures\n";
  for (const auto& cell : end_to_end) {
    out << cell.predictor << "," << cell.strategy << "," << cell.profiler << ","
        << cell.context << "," << cell.f1_positive << "," << cell.f1_macro << "," << cell.auc
        << "," << cell.n << "," << cell.failures << "\n";
  }
  return out.str();
}

void save_report(const MetricReport& report, const std::string& path) {
  write_file_atomic(path, report.to_json());
}

MetricReport load_report(const std::string& path) {
  return MetricReport::from_json(read_text_file(path));
}

}  // namespace persuade
