#include "persuade/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "persuade/errors.hpp"
#include "persuade/hashutil.hpp"
#include "persuade/io.hpp"

namespace persuade {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

const char* source_name(UserRecord::Source source) {
  return source == UserRecord::Source::cmv ? "cmv" : "other_subreddit";
}

std::optional<UserRecord::Source> parse_source(std::string_view name) {
  if (name == "cmv") return UserRecord::Source::cmv;
  if (name == "other_subreddit") return UserRecord::Source::other_subreddit;
  return std::nullopt;
}

int PersuasionInstance::n_delta() const {
  int n = 0;
  for (const auto& c : comments) n += (c.label == 1);
  return n;
}

int PersuasionInstance::n_non_delta() const {
  int n = 0;
  for (const auto& c : comments) n += (c.label == 0);
  return n;
}

const UserRecord* PersuasionInstance::find_record(std::string_view record_id) const {
  for (const auto& r : full_history)
    if (r.record_id == record_id) return &r;
  return nullptr;
}

const PersuasionInstance* Corpus::find(std::string_view instance_id) const {
  for (const auto& inst : instances)
    if (inst.instance_id == instance_id) return &inst;
  return nullptr;
}

const char* split_name(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

std::optional<Split> parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "validation") return Split::validation;
  if (name == "test") return Split::test;
  return std::nullopt;
}

std::size_t SplitAssignment::count(Split split) const {
  std::size_t n = 0;
  for (const auto& [_, s] : assignment) n += (s == split);
  return n;
}

namespace {

std::string require_string(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj[key].is_string())
    throw Error(Errc::schema_violation, std::string("missing string field '") + key + "'");
  return obj[key].get<std::string>();
}

std::int64_t require_int(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj[key].is_number_integer())
    throw Error(Errc::schema_violation, std::string("missing integer field '") + key + "'");
  return obj[key].get<std::int64_t>();
}

UserRecord parse_record(const json& obj) {
  UserRecord rec;
  rec.record_id = require_string(obj, "record_id");
  rec.author_id = require_string(obj, "author_id");
  rec.text = require_string(obj, "text");
  rec.created_at = require_int(obj, "created_at");
  if (rec.created_at <= 0) throw Error(Errc::schema_violation, "created_at must be > 0");
  if (trim(rec.text).empty()) throw Error(Errc::schema_violation, "record text empty");
  auto source = parse_source(obj.value("source", "cmv"));
  if (!source) throw Error(Errc::schema_violation, "unknown source");
  rec.source = *source;
  return rec;
}

PersuasionInstance parse_instance(const json& obj) {
  PersuasionInstance inst;
  inst.instance_id = require_string(obj, "instance_id");
  inst.user_id = require_string(obj, "user_id");
  inst.post_text = require_string(obj, "post_text");
  inst.post_created_at = require_int(obj, "post_created_at");
  if (!obj.contains("comments") || !obj["comments"].is_array())
    throw Error(Errc::schema_violation, "missing comments array");
  for (const auto& c : obj["comments"]) {
    CommentLabel comment;
    comment.comment_id = require_string(c, "comment_id");
    comment.text = require_string(c, "text");
    std::int64_t label = require_int(c, "label");
    if (label != 0 && label != 1) throw Error(Errc::schema_violation, "label must be 0 or 1");
    comment.label = static_cast<int>(label);
    inst.comments.push_back(std::move(comment));
  }
  return inst;
}

void sort_history(PersuasionInstance& inst) {
  std::stable_sort(inst.full_history.begin(), inst.full_history.end(),
                   [](const UserRecord& a, const UserRecord& b) {
                     if (a.created_at != b.created_at) return a.created_at < b.created_at;
                     return a.record_id < b.record_id;
                   });
}

}  // namespace

Corpus ingest(const std::string& threads_path, const std::string& histories_path,
              IngestReport* report, double malformed_tolerance) {
  IngestReport local;
  IngestReport& rep = report ? *report : local;

  Corpus corpus;
  std::unordered_map<std::string, std::vector<std::size_t>> by_user;

  for_each_line(threads_path, [&](std::size_t line_no, std::string_view line) {
    ++rep.total_lines;
    try {
      json obj = json::parse(line);
      PersuasionInstance inst = parse_instance(obj);
      by_user[inst.user_id].push_back(corpus.instances.size());
      corpus.instances.push_back(std::move(inst));
    } catch (const std::exception& e) {
      ++rep.malformed_lines;
      rep.issues.push_back({threads_path, line_no, e.what()});
    }
  });

  std::unordered_map<std::string, bool> seen_record_ids;
  for_each_line(histories_path, [&](std::size_t line_no, std::string_view line) {
    ++rep.total_lines;
    try {
      json obj = json::parse(line);
      UserRecord rec = parse_record(obj);
      if (seen_record_ids[rec.record_id]) {
        throw Error(Errc::schema_violation, "duplicate record_id " + rec.record_id);
      }
      seen_record_ids[rec.record_id] = true;
      auto it = by_user.find(rec.author_id);
      if (it == by_user.end()) {
        ++rep.orphan_records;
        return;
      }
      for (std::size_t idx : it->second) {
        PersuasionInstance& inst = corpus.instances[idx];
        if (rec.created_at >= inst.post_created_at) {
          ++rep.dropped_records;
          rep.warnings.push_back("record " + rec.record_id + " not older than post " +
                                 inst.instance_id + "; dropped");
          continue;
        }
        inst.full_history.push_back(rec);
      }
    } catch (const std::exception& e) {
      ++rep.malformed_lines;
      rep.issues.push_back({histories_path, line_no, e.what()});
    }
  });

  if (rep.total_lines > 0 &&
      static_cast<double>(rep.malformed_lines) >
          malformed_tolerance * static_cast<double>(rep.total_lines)) {
    const IngestIssue& first = rep.issues.front();
    raise(Errc::schema_violation,
          "too many malformed lines (" + std::to_string(rep.malformed_lines) + "/" +
              std::to_string(rep.total_lines) + "), first at " + first.file + ":" +
              std::to_string(first.line_no) + " (" + first.reason + ")");
  }
  if (corpus.instances.empty()) raise(Errc::empty_corpus, threads_path);

  for (auto& inst : corpus.instances) sort_history(inst);
  return corpus;
}

namespace {

ojson record_to_json(const UserRecord& rec) {
  ojson obj;
  obj["record_id"] = rec.record_id;
  obj["author_id"] = rec.author_id;
  obj["text"] = rec.text;
  obj["created_at"] = rec.created_at;
  obj["source"] = source_name(rec.source);
  return obj;
}

ojson instance_to_json(const PersuasionInstance& inst) {
  ojson obj;
  obj["instance_id"] = inst.instance_id;
  obj["user_id"] = inst.user_id;
  obj["post_text"] = inst.post_text;
  obj["post_created_at"] = inst.post_created_at;
  ojson comments = ojson::array();
  for (const auto& c : inst.comments) {
    ojson cj;
    cj["comment_id"] = c.comment_id;
    cj["text"] = c.text;
    cj["label"] = c.label;
    comments.push_back(std::move(cj));
  }
  obj["comments"] = std::move(comments);
  ojson history = ojson::array();
  for (const auto& r : inst.full_history) history.push_back(record_to_json(r));
  obj["history"] = std::move(history);
  if (!inst.pool.empty()) obj["pool"] = inst.pool;
  return obj;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ostringstream out;
  for (const auto& inst : corpus.instances) out << instance_to_json(inst).dump() << "\n";
  write_file_atomic(path, out.str());
}

Corpus load_corpus(const std::string& path) {
  Corpus corpus;
  for_each_line(path, [&](std::size_t line_no, std::string_view line) {
    json obj;
    try {
      obj = json::parse(line);
    } catch (const std::exception& e) {
      raise(Errc::schema_violation, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    PersuasionInstance inst = parse_instance(obj);
    if (obj.contains("history")) {
      for (const auto& rj : obj["history"]) inst.full_history.push_back(parse_record(rj));
    }
    if (obj.contains("pool")) inst.pool = obj["pool"].get<std::vector<std::string>>();
    sort_history(inst);
    corpus.instances.push_back(std::move(inst));
  });
  if (corpus.instances.empty()) raise(Errc::empty_corpus, path);
  return corpus;
}

Corpus filter_instances(Corpus corpus, int min_history) {
  auto keep = [min_history](const PersuasionInstance& inst) {
    return inst.n_delta() >= 1 && inst.n_non_delta() >= 1 &&
           inst.full_history.size() >= static_cast<std::size_t>(min_history);
  };
  std::vector<PersuasionInstance> kept;
  kept.reserve(corpus.instances.size());
  for (auto& inst : corpus.instances)
    if (keep(inst)) kept.push_back(std::move(inst));
  corpus.instances = std::move(kept);
  return corpus;
}

SplitAssignment split_corpus(const Corpus& corpus, std::array<double, 3> ratios,
                             std::uint64_t seed) {
  double total = ratios[0] + ratios[1] + ratios[2];
  if (std::fabs(total - 1.0) > 1e-9) raise(Errc::bad_ratios, "ratios must sum to 1");
  for (double r : ratios)
    if (r < 0.0) raise(Errc::bad_ratios, "negative ratio");

  std::vector<std::string> ids;
  ids.reserve(corpus.instances.size());
  for (const auto& inst : corpus.instances) ids.push_back(inst.instance_id);
  std::sort(ids.begin(), ids.end());
  seeded_shuffle(ids, stable_hash(std::string("split"), seed));

  // Largest-remainder apportionment; remainder ties go to the later bucket
  // (test before validation before train) so 1676 lands on 1341/167/168.
  const std::size_t n = ids.size();
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (int b = 0; b < 3; ++b) {
    double exact = ratios[b] * static_cast<double>(n);
    counts[b] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainders[b] = exact - static_cast<double>(counts[b]);
    assigned += counts[b];
  }
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (remainders[a] != remainders[b]) return remainders[a] > remainders[b];
    return a > b;
  });
  for (std::size_t leftover = n - assigned, i = 0; i < leftover; ++i) ++counts[order[i % 3]];

  SplitAssignment result;
  result.seed = seed;
  result.ratios = ratios;
  std::size_t pos = 0;
  for (int b = 0; b < 3; ++b) {
    for (std::size_t i = 0; i < counts[b]; ++i, ++pos) {
      result.assignment[ids[pos]] = static_cast<Split>(b);
    }
  }
  return result;
}

void save_splits(const SplitAssignment& splits, const std::string& path) {
  ojson obj;
  obj["seed"] = splits.seed;
  obj["ratios"] = splits.ratios;
  ojson assignment;
  for (const auto& [id, split] : splits.assignment) assignment[id] = split_name(split);
  obj["assignment"] = std::move(assignment);
  write_file_atomic(path, obj.dump(2) + "\n");
}

SplitAssignment load_splits(const std::string& path) {
  json obj;
  try {
    obj = json::parse(read_text_file(path));
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    raise(Errc::schema_violation, path + ": " + e.what());
  }
  SplitAssignment splits;
  splits.seed = obj.value("seed", 0ull);
  if (obj.contains("ratios")) {
    auto r = obj["ratios"].get<std::vector<double>>();
    if (r.size() != 3) raise(Errc::schema_violation, "ratios must have 3 entries");
    splits.ratios = {r[0], r[1], r[2]};
  }
  for (const auto& [id, name] : obj.at("assignment").items()) {
    auto split = parse_split(name.get<std::string>());
    if (!split) raise(Errc::schema_violation, "unknown split label for " + id);
    splits.assignment[id] = *split;
  }
  return splits;
}

}  // namespace persuade
