#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace persuade {

// One historical post or comment written by a user before the instance's
// original post.
struct UserRecord {
  std::string record_id;
  std::string author_id;
  std::string text;
  std::int64_t created_at = 0;  // epoch seconds
  enum class Source { cmv, other_subreddit } source = Source::cmv;
};

const char* source_name(UserRecord::Source source);
std::optional<UserRecord::Source> parse_source(std::string_view name);

struct CommentLabel {
  std::string comment_id;
  std::string text;
  int label = 0;  // 1 = view changed (delta awarded), 0 = not
};

// The unit of evaluation: a post, its labeled reply comments, and the
// author's history. full_history is kept sorted ascending by created_at and
// only contains records older than the post.
struct PersuasionInstance {
  std::string instance_id;
  std::string user_id;
  std::string post_text;
  std::int64_t post_created_at = 0;
  std::vector<CommentLabel> comments;
  std::vector<UserRecord> full_history;
  std::vector<std::string> pool;  // subsampled record ids; empty until built

  int n_delta() const;
  int n_non_delta() const;
  const UserRecord* find_record(std::string_view record_id) const;
};

struct Corpus {
  std::vector<PersuasionInstance> instances;

  const PersuasionInstance* find(std::string_view instance_id) const;
};

enum class Split { train, validation, test };
const char* split_name(Split split);
std::optional<Split> parse_split(std::string_view name);

struct SplitAssignment {
  std::uint64_t seed = 0;
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  std::map<std::string, Split> assignment;

  std::size_t count(Split split) const;
};

struct IngestIssue {
  std::string file;
  std::size_t line_no = 0;
  std::string reason;
};

struct IngestReport {
  std::size_t total_lines = 0;
  std::size_t malformed_lines = 0;
  std::size_t dropped_records = 0;   // history records not older than the post
  std::size_t orphan_records = 0;    // history records with no matching instance author
  std::vector<IngestIssue> issues;
  std::vector<std::string> warnings;
};

// Reads threads.jsonl + histories.jsonl. Malformed lines are recorded in the
// report; the load aborts with SchemaViolation only when they exceed
// `malformed_tolerance` of all lines read.
Corpus ingest(const std::string& threads_path, const std::string& histories_path,
              IngestReport* report = nullptr, double malformed_tolerance = 0.10);

// Normalized single-file corpus snapshot (instances with inline history).
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

// Appendix-style interaction filters: >=1 delta, >=1 non-delta comment and
// at least `min_history` prior records. Idempotent.
Corpus filter_instances(Corpus corpus, int min_history = 15);

// Deterministic split of instance ids by seeded shuffle + largest-remainder
// apportionment of the ratio targets.
SplitAssignment split_corpus(const Corpus& corpus, std::array<double, 3> ratios,
                             std::uint64_t seed);

void save_splits(const SplitAssignment& splits, const std::string& path);
SplitAssignment load_splits(const std::string& path);

class Retriever;  // retrieval.hpp

// Top-`limit` records of full_history under hybrid rank, queried with the
// newline-joined concatenation of the instance's delta comments (comment_id
// order). Returns full_history order-preserved-by-rank when it already fits.
std::vector<std::string> build_pool(const PersuasionInstance& instance,
                                    const Retriever& retriever,
                                    std::size_t limit = 100);

}  // namespace persuade
