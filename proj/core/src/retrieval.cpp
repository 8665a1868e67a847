#include "persuade/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "persuade/errors.hpp"
#include "persuade/hashutil.hpp"
#include "persuade/io.hpp"
#include "persuade/prompts.hpp"
#include "persuade/textutil.hpp"

namespace persuade {

LexicalIndex index_lexical(const std::vector<UserRecord>& records, double k1, double b) {
  if (records.empty()) raise(Errc::empty_input, "cannot index zero records");
  LexicalIndex index;
  index.k1 = k1;
  index.b = b;
  std::size_t total_len = 0;
  for (const auto& rec : records) {
    std::uint32_t doc = static_cast<std::uint32_t>(index.doc_ids.size());
    index.doc_ids.push_back(rec.record_id);
    std::unordered_map<std::string, std::uint32_t> tf;
    auto tokens = tokenize(rec.text);
    for (const auto& token : tokens) ++tf[token];
    index.doc_len.push_back(tokens.size());
    total_len += tokens.size();
    for (const auto& [term, freq] : tf) index.postings[term].emplace_back(doc, freq);
  }
  index.avgdl = static_cast<double>(total_len) / static_cast<double>(records.size());
  return index;
}

ScoreMap score_lexical(const LexicalIndex& index, const std::string& query) {
  if (index.doc_ids.empty()) raise(Errc::empty_input, "empty index");
  const double n_docs = static_cast<double>(index.doc_ids.size());
  std::vector<double> scores(index.doc_ids.size(), 0.0);
  for (const auto& term : tokenize(query)) {
    auto it = index.postings.find(term);
    if (it == index.postings.end()) continue;
    const auto& plist = it->second;
    double df = static_cast<double>(plist.size());
    double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
    for (const auto& [doc, tf] : plist) {
      double len_norm = index.k1 * (1.0 - index.b +
                                    index.b * static_cast<double>(index.doc_len[doc]) /
                                        (index.avgdl > 0.0 ? index.avgdl : 1.0));
      scores[doc] += idf * (static_cast<double>(tf) * (index.k1 + 1.0)) /
                     (static_cast<double>(tf) + len_norm);
    }
  }
  ScoreMap out;
  out.reserve(index.doc_ids.size());
  for (std::size_t i = 0; i < index.doc_ids.size(); ++i) out[index.doc_ids[i]] = scores[i];
  return out;
}

void VectorStore::add(const std::string& id, const std::vector<float>& vec) {
  if (dim == 0) dim = vec.size();
  if (vec.size() != dim)
    raise(Errc::dimension_mismatch,
          "vector for " + id + " has dim " + std::to_string(vec.size()) + ", store has " +
              std::to_string(dim));
  by_id[id] = ids.size();
  ids.push_back(id);
  data.insert(data.end(), vec.begin(), vec.end());
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
  if (pos + 4 > in.size()) raise(Errc::schema_violation, "truncated vector store");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += 4;
  return v;
}

}  // namespace

void save_vector_store(const VectorStore& store, const std::string& path) {
  std::string out;
  out.reserve(16 + store.data.size() * 4);
  put_u32(out, static_cast<std::uint32_t>(store.dim));
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    put_u32(out, static_cast<std::uint32_t>(store.ids[i].size()));
    out.append(store.ids[i]);
    const float* row = store.row(i);
    for (std::size_t d = 0; d < store.dim; ++d) {
      std::uint32_t bits;
      std::memcpy(&bits, &row[d], 4);
      put_u32(out, bits);
    }
  }
  write_file_atomic(path, out);
}

VectorStore load_vector_store(const std::string& path) {
  std::string in = read_text_file(path);
  std::size_t pos = 0;
  VectorStore store;
  store.dim = get_u32(in, pos);
  std::uint32_t count = get_u32(in, pos);
  std::vector<float> vec(store.dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t id_len = get_u32(in, pos);
    if (pos + id_len > in.size()) raise(Errc::schema_violation, "truncated vector store");
    std::string id = in.substr(pos, id_len);
    pos += id_len;
    for (std::size_t d = 0; d < store.dim; ++d) {
      std::uint32_t bits = get_u32(in, pos);
      std::memcpy(&vec[d], &bits, 4);
    }
    store.add(id, vec);
  }
  return store;
}

ScoreMap score_dense(const VectorStore& store, const std::vector<float>& query) {
  if (store.size() == 0) raise(Errc::empty_input, "empty vector store");
  if (query.size() != store.dim)
    raise(Errc::dimension_mismatch, "query dim " + std::to_string(query.size()) +
                                        " vs store dim " + std::to_string(store.dim));
  double qnorm = 0.0;
  for (float v : query) qnorm += static_cast<double>(v) * v;
  qnorm = std::sqrt(qnorm);
  ScoreMap out;
  out.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const float* row = store.row(i);
    double dot = 0.0, rnorm = 0.0;
    for (std::size_t d = 0; d < store.dim; ++d) {
      dot += static_cast<double>(row[d]) * query[d];
      rnorm += static_cast<double>(row[d]) * row[d];
    }
    double denom = qnorm * std::sqrt(rnorm);
    out[store.ids[i]] = denom > 0.0 ? dot / denom : 0.0;
  }
  return out;
}

std::vector<std::string> Ranking::ids(std::size_t k) const {
  std::size_t n = k == 0 ? items.size() : std::min(k, items.size());
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(items[i].record_id);
  return out;
}

namespace {

std::int64_t recency_of(const std::unordered_map<std::string, std::int64_t>* created_at,
                        const std::string& id) {
  if (!created_at) return 0;
  auto it = created_at->find(id);
  return it == created_at->end() ? 0 : it->second;
}

void sort_ranked(std::vector<RankedItem>& items,
                 const std::unordered_map<std::string, std::int64_t>* created_at) {
  std::sort(items.begin(), items.end(), [&](const RankedItem& a, const RankedItem& b) {
    if (a.score != b.score) return a.score > b.score;
    std::int64_t ra = recency_of(created_at, a.record_id);
    std::int64_t rb = recency_of(created_at, b.record_id);
    if (ra != rb) return ra > rb;
    return a.record_id < b.record_id;
  });
}

}  // namespace

Ranking rank_scores(const ScoreMap& scores,
                    const std::unordered_map<std::string, std::int64_t>* created_at) {
  Ranking ranking;
  ranking.items.reserve(scores.size());
  for (const auto& [id, score] : scores) ranking.items.push_back({id, score});
  sort_ranked(ranking.items, created_at);
  return ranking;
}

Ranking hybrid_rank(const ScoreMap& lexical, const ScoreMap& dense, double weight,
                    const std::unordered_map<std::string, std::int64_t>* created_at,
                    FusionRule rule) {
  if (lexical.size() != dense.size())
    raise(Errc::key_set_mismatch, "score maps differ in size");
  for (const auto& [id, _] : lexical)
    if (!dense.count(id)) raise(Errc::key_set_mismatch, "id " + id + " missing from dense map");
  if (weight < 0.0 || weight > 1.0) raise(Errc::bad_config, "fusion weight outside [0,1]");

  ScoreMap fused;
  fused.reserve(lexical.size());

  if (rule == FusionRule::reciprocal_rank) {
    constexpr double kRrfOffset = 60.0;
    Ranking lex_rank = rank_scores(lexical, created_at);
    Ranking den_rank = rank_scores(dense, created_at);
    for (std::size_t i = 0; i < lex_rank.items.size(); ++i)
      fused[lex_rank.items[i].record_id] += weight / (kRrfOffset + static_cast<double>(i + 1));
    for (std::size_t i = 0; i < den_rank.items.size(); ++i)
      fused[den_rank.items[i].record_id] +=
          (1.0 - weight) / (kRrfOffset + static_cast<double>(i + 1));
  } else {
    auto normalized = [](const ScoreMap& scores) {
      double lo = 0.0, hi = 0.0;
      bool first = true;
      for (const auto& [_, s] : scores) {
        if (first) {
          lo = hi = s;
          first = false;
        } else {
          lo = std::min(lo, s);
          hi = std::max(hi, s);
        }
      }
      ScoreMap out;
      out.reserve(scores.size());
      for (const auto& [id, s] : scores)
        out[id] = hi > lo ? (s - lo) / (hi - lo) : 0.5;  // constant map -> all 0.5
      return out;
    };
    ScoreMap lex_norm = normalized(lexical);
    ScoreMap den_norm = normalized(dense);
    for (const auto& [id, s] : lex_norm) fused[id] = weight * s + (1.0 - weight) * den_norm[id];
  }

  Ranking ranking = rank_scores(fused, created_at);
  ranking.strategy = "hybrid";
  return ranking;
}

const char* strategy_name(QueryStrategy strategy) {
  switch (strategy) {
    case QueryStrategy::recent: return "recent";
    case QueryStrategy::random: return "random";
    case QueryStrategy::lexical_post: return "lexical_post";
    case QueryStrategy::dense_post: return "dense_post";
    case QueryStrategy::hyde: return "hyde";
    case QueryStrategy::generated: return "generated";
  }
  return "?";
}

std::optional<QueryStrategy> parse_strategy(std::string_view name) {
  if (name == "recent") return QueryStrategy::recent;
  if (name == "random") return QueryStrategy::random;
  if (name == "lexical_post" || name == "bm25") return QueryStrategy::lexical_post;
  if (name == "dense_post") return QueryStrategy::dense_post;
  if (name == "hyde") return QueryStrategy::hyde;
  if (name == "generated") return QueryStrategy::generated;
  return std::nullopt;
}

Retriever::Retriever(std::vector<UserRecord> records, Gateway& gateway, BackendConfig embedder,
                     double k1, double b)
    : records_(std::move(records)), gateway_(&gateway), embedder_(std::move(embedder)) {
  if (records_.empty()) raise(Errc::empty_input, "retriever needs at least one record");
  lexical_ = index_lexical(records_, k1, b);
  std::vector<std::string> texts;
  texts.reserve(records_.size());
  for (const auto& rec : records_) {
    texts.push_back(rec.text);
    created_at_[rec.record_id] = rec.created_at;
  }
  auto vectors = gateway.embed(embedder_, texts);
  for (std::size_t i = 0; i < records_.size(); ++i)
    store_.add(records_[i].record_id, vectors[i]);
}

Retriever::Retriever(std::vector<UserRecord> records, const VectorStore& prebuilt,
                     Gateway& gateway, BackendConfig embedder, double k1, double b)
    : records_(std::move(records)), gateway_(&gateway), embedder_(std::move(embedder)) {
  if (records_.empty()) raise(Errc::empty_input, "retriever needs at least one record");
  lexical_ = index_lexical(records_, k1, b);
  std::vector<float> vec(prebuilt.dim);
  for (const auto& rec : records_) {
    created_at_[rec.record_id] = rec.created_at;
    auto it = prebuilt.by_id.find(rec.record_id);
    if (it == prebuilt.by_id.end())
      raise(Errc::retriever_unavailable, "vector store lacks record " + rec.record_id);
    const float* row = prebuilt.row(it->second);
    vec.assign(row, row + prebuilt.dim);
    store_.add(rec.record_id, vec);
  }
}

ScoreMap Retriever::dense_scores(const std::string& query_text) const {
  auto vectors = gateway_->embed(embedder_, {query_text});
  return score_dense(store_, vectors[0]);
}

Ranking Retriever::rank_lexical(const std::string& query_text) const {
  Ranking ranking = rank_scores(score_lexical(lexical_, query_text), &created_at_);
  ranking.query_text = query_text;
  ranking.strategy = "lexical";
  return ranking;
}

Ranking Retriever::rank_dense(const std::string& query_text) const {
  Ranking ranking = rank_scores(dense_scores(query_text), &created_at_);
  ranking.query_text = query_text;
  ranking.strategy = "dense";
  return ranking;
}

Ranking Retriever::rank_hybrid(const std::string& query_text, double weight,
                               FusionRule rule) const {
  ScoreMap lex = score_lexical(lexical_, query_text);
  ScoreMap den = dense_scores(query_text);
  Ranking ranking = hybrid_rank(lex, den, weight, &created_at_, rule);
  ranking.query_text = query_text;
  return ranking;
}

std::string generate_hyde(Gateway& gateway, const BackendConfig& backend,
                          const std::string& post) {
  if (trim(post).empty()) raise(Errc::empty_input, "hyde needs a non-empty post");
  prompts::Rendered rendered = prompts::hyde(post);
  ChatParams params;
  params.temperature = 0.0;
  params.max_tokens = 256;
  params.seed = 0;
  params.system = rendered.system;
  params.user = rendered.user;
  return gateway.chat(backend, params).text;
}

std::vector<std::string> build_pool(const PersuasionInstance& instance,
                                    const Retriever& retriever, std::size_t limit) {
  if (limit == 0) raise(Errc::bad_config, "pool limit must be >= 1");
  if (retriever.records().size() != instance.full_history.size())
    raise(Errc::retriever_unavailable, "retriever does not index exactly full_history");
  for (const auto& rec : instance.full_history) {
    if (!retriever.store().by_id.count(rec.record_id))
      raise(Errc::retriever_unavailable,
            "retriever has not indexed record " + rec.record_id);
  }

  std::vector<const CommentLabel*> deltas;
  for (const auto& comment : instance.comments)
    if (comment.label == 1) deltas.push_back(&comment);
  if (deltas.empty()) raise(Errc::empty_input, "instance has no delta comment");
  std::sort(deltas.begin(), deltas.end(),
            [](const CommentLabel* a, const CommentLabel* b) {
              return a->comment_id < b->comment_id;
            });
  std::string query;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (i > 0) query += "\n";
    query += deltas[i]->text;
  }

  Ranking ranking = retriever.rank_hybrid(query);
  return ranking.ids(std::min(limit, instance.full_history.size()));
}

Ranking retrieve(QueryStrategy strategy, const PersuasionInstance& instance,
                 const Retriever& pool_retriever, Gateway& gateway, const RetrieveOpts& opts) {
  const auto& records = pool_retriever.records();
  if (records.empty()) raise(Errc::empty_input, "empty pool");
  if (opts.k == 0) raise(Errc::bad_config, "k must be >= 1");
  const std::size_t k = std::min(opts.k, records.size());

  Ranking ranking;
  switch (strategy) {
    case QueryStrategy::recent: {
      ScoreMap scores;
      for (const auto& rec : records)
        scores[rec.record_id] = static_cast<double>(rec.created_at);
      ranking = rank_scores(scores, &pool_retriever.created_at());
      break;
    }
    case QueryStrategy::random: {
      std::vector<std::string> ids;
      ids.reserve(records.size());
      for (const auto& rec : records) ids.push_back(rec.record_id);
      std::sort(ids.begin(), ids.end());
      seeded_shuffle(ids, opts.random_seed);
      for (std::size_t i = 0; i < ids.size(); ++i)
        ranking.items.push_back({ids[i], -static_cast<double>(i)});
      break;
    }
    case QueryStrategy::lexical_post:
      ranking = pool_retriever.rank_lexical(instance.post_text);
      break;
    case QueryStrategy::dense_post:
      ranking = pool_retriever.rank_dense(instance.post_text);
      break;
    case QueryStrategy::hyde: {
      std::string pseudo = generate_hyde(gateway, opts.hyde_backend, instance.post_text);
      ranking = pool_retriever.rank_dense(pseudo);
      break;
    }
    case QueryStrategy::generated: {
      if (!opts.query_text)
        raise(Errc::missing_query_text, "generated strategy requires query_text");
      ranking = pool_retriever.rank_dense(*opts.query_text);
      break;
    }
  }
  ranking.strategy = strategy_name(strategy);
  if (ranking.items.size() > k) ranking.items.resize(k);
  return ranking;
}

}  // namespace persuade
