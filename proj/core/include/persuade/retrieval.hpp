#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "persuade/corpus.hpp"
#include "persuade/gateway.hpp"

namespace persuade {

using ScoreMap = std::unordered_map<std::string, double>;

// Okapi BM25 inverted index. Scores use the +1-smoothed IDF so that every
// score is >= 0 and absent-term documents score exactly 0.
struct LexicalIndex {
  double k1 = 1.2;
  double b = 0.75;
  double avgdl = 0.0;
  std::vector<std::string> doc_ids;
  std::vector<std::size_t> doc_len;
  std::unordered_map<std::string, std::vector<std::pair<std::uint32_t, std::uint32_t>>>
      postings;  // term -> (doc index, term frequency)
};

LexicalIndex index_lexical(const std::vector<UserRecord>& records, double k1 = 1.2,
                           double b = 0.75);

// BM25 over the query tokens (with multiplicity). Covers every indexed doc.
ScoreMap score_lexical(const LexicalIndex& index, const std::string& query);

struct VectorStore {
  std::size_t dim = 0;
  std::vector<std::string> ids;
  std::vector<float> data;  // row-major, ids.size() x dim
  std::unordered_map<std::string, std::size_t> by_id;

  void add(const std::string& id, const std::vector<float>& vec);
  const float* row(std::size_t i) const { return data.data() + i * dim; }
  std::size_t size() const { return ids.size(); }
};

// vectors.bin layout: u32 dim, u32 count, then per entry u32 id length,
// id bytes, dim little-endian f32.
void save_vector_store(const VectorStore& store, const std::string& path);
VectorStore load_vector_store(const std::string& path);

// Cosine similarity of the query against every stored vector.
ScoreMap score_dense(const VectorStore& store, const std::vector<float>& query);

struct RankedItem {
  std::string record_id;
  double score;
};

struct Ranking {
  std::vector<RankedItem> items;
  std::string query_text;
  std::string strategy;

  std::vector<std::string> ids(std::size_t k = 0) const;
};

enum class FusionRule { minmax_weighted, reciprocal_rank };

// Min-max normalizes both maps (constant maps become all-0.5) and fuses
// weight*lex + (1-weight)*dense. Ties break by recency then record_id.
Ranking hybrid_rank(const ScoreMap& lexical, const ScoreMap& dense, double weight = 0.5,
                    const std::unordered_map<std::string, std::int64_t>* created_at = nullptr,
                    FusionRule rule = FusionRule::minmax_weighted);

// Deterministic full ordering of a score map (score desc, recency desc, id asc).
Ranking rank_scores(const ScoreMap& scores,
                    const std::unordered_map<std::string, std::int64_t>* created_at = nullptr);

enum class QueryStrategy { recent, random, lexical_post, dense_post, hyde, generated };
const char* strategy_name(QueryStrategy strategy);
std::optional<QueryStrategy> parse_strategy(std::string_view name);

// Bundles the per-candidate-set search state: lexical index, dense store and
// record metadata. Records are embedded once at construction through the
// gateway; instances are immutable afterwards and safe to share.
class Retriever {
 public:
  Retriever(std::vector<UserRecord> records, Gateway& gateway, BackendConfig embedder,
            double k1 = 1.2, double b = 0.75);

  // Reuses vectors from a prebuilt store (vectors.bin) instead of embedding
  // the records again; queries still embed through the gateway.
  Retriever(std::vector<UserRecord> records, const VectorStore& prebuilt, Gateway& gateway,
            BackendConfig embedder, double k1 = 1.2, double b = 0.75);

  const std::vector<UserRecord>& records() const { return records_; }
  const LexicalIndex& lexical() const { return lexical_; }
  const VectorStore& store() const { return store_; }
  const std::unordered_map<std::string, std::int64_t>& created_at() const { return created_at_; }

  ScoreMap dense_scores(const std::string& query_text) const;
  Ranking rank_lexical(const std::string& query_text) const;
  Ranking rank_dense(const std::string& query_text) const;
  Ranking rank_hybrid(const std::string& query_text, double weight = 0.5,
                      FusionRule rule = FusionRule::minmax_weighted) const;

 private:
  std::vector<UserRecord> records_;
  LexicalIndex lexical_;
  VectorStore store_;
  std::unordered_map<std::string, std::int64_t> created_at_;
  Gateway* gateway_;
  BackendConfig embedder_;
};

struct RetrieveOpts {
  std::size_t k = 5;
  std::optional<std::string> query_text;  // required for `generated`
  std::uint64_t random_seed = 0;
  BackendConfig hyde_backend;             // chat backend used by `hyde`
};

// Executes one query strategy over the instance's pooled records and returns
// the top min(k, pool) records.
Ranking retrieve(QueryStrategy strategy, const PersuasionInstance& instance,
                 const Retriever& pool_retriever, Gateway& gateway, const RetrieveOpts& opts);

// Single temperature-0 completion used verbatim as a dense retrieval query.
std::string generate_hyde(Gateway& gateway, const BackendConfig& backend,
                          const std::string& post);

}  // namespace persuade
