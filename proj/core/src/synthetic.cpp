#include "persuade/synthetic.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "persuade/errors.hpp"
#include "persuade/hashutil.hpp"
#include "persuade/io.hpp"

namespace persuade {

using ojson = nlohmann::ordered_json;

namespace {

const char* const kConsonants = "bdfgklmnprstvz";
const char* const kVowels = "aeiou";

// Pronounceable 6-letter CVCVCV token; single alphanumeric token by
// construction, and long enough not to collide with filler words.
std::string syllable_token(SplitMix64& rng) {
  std::string out;
  for (int i = 0; i < 3; ++i) {
    out.push_back(kConsonants[rng.bounded(14)]);
    out.push_back(kVowels[rng.bounded(5)]);
  }
  return out;
}

const std::vector<std::string>& filler_vocab() {
  static const std::vector<std::string> kFiller = {
      "today",  "city",    "library", "coffee", "weather", "music",  "cycling",
      "garden", "recipe",  "movie",   "river",  "market",  "train",  "novel",
      "hiking", "kitchen", "street",  "winter", "summer",  "museum", "bridge",
      "island", "picnic",  "podcast", "puzzle", "chess",   "bakery", "harbor"};
  return kFiller;
}

std::string filler_sentence(SplitMix64& rng, int n_words) {
  const auto& vocab = filler_vocab();
  std::ostringstream out;
  out << "thinking about";
  for (int i = 0; i < n_words; ++i) out << " " << vocab[rng.bounded(vocab.size())];
  return out.str();
}

std::string two_digits(int value) {
  std::string out = std::to_string(value);
  return out.size() < 2 ? "0" + out : out;
}

}  // namespace

SyntheticWorld make_world(const WorldSpec& spec) {
  if (spec.n_users < 1 || spec.records_per_user < 1)
    raise(Errc::bad_config, "world needs at least one user and one record");
  if (spec.leaking_per_user + spec.poison_per_user > spec.records_per_user)
    raise(Errc::bad_config, "more leaking/poison records than records_per_user");
  if (spec.deltas_per_instance < 1 || spec.nondeltas_per_instance < 1)
    raise(Errc::bad_config, "instances need at least one delta and one non-delta comment");

  SplitMix64 rng(stable_hash(std::string_view("world"), spec.seed));
  SyntheticWorld result;
  result.world.degrade_every = spec.degrade_every;

  // Attribute vocabulary: unique tokens, disjoint from filler words.
  std::set<std::string> used(filler_vocab().begin(), filler_vocab().end());
  std::vector<std::vector<std::string>> user_attrs(spec.n_users);
  std::vector<std::string> user_ids(spec.n_users);
  for (int u = 0; u < spec.n_users; ++u) {
    user_ids[u] = "u" + two_digits(u);
    for (int a = 0; a < spec.attrs_per_user; ++a) {
      std::string token = syllable_token(rng);
      while (used.count(token)) token = syllable_token(rng);
      used.insert(token);
      user_attrs[u].push_back(token);
    }
    std::sort(user_attrs[u].begin(), user_attrs[u].end());
    result.world.users[user_ids[u]] = user_attrs[u];
  }

  const std::int64_t post_time = 1000000;
  for (int u = 0; u < spec.n_users; ++u) {
    const std::string& user_id = user_ids[u];
    const auto& attrs = user_attrs[u];
    const auto& next_attrs = user_attrs[(u + 1) % spec.n_users];

    PersuasionInstance inst;
    inst.instance_id = "i-" + user_id;
    inst.user_id = user_id;
    inst.post_created_at = post_time;
    inst.post_text = "cmv " + user_id + " i believe the " +
                     filler_vocab()[rng.bounded(filler_vocab().size())] +
                     " plan should stay the same and nothing about " +
                     filler_vocab()[rng.bounded(filler_vocab().size())] + " changes that";

    // Leaking / poison record slots, chosen deterministically.
    std::vector<int> slots(spec.records_per_user);
    for (int r = 0; r < spec.records_per_user; ++r) slots[r] = r;
    seeded_shuffle(slots, stable_hash(spec.seed, std::string_view("slots"), user_id));
    std::set<int> leak_slots(slots.begin(), slots.begin() + spec.leaking_per_user);
    std::set<int> poison_slots(slots.begin() + spec.leaking_per_user,
                               slots.begin() + spec.leaking_per_user + spec.poison_per_user);

    for (int r = 0; r < spec.records_per_user; ++r) {
      UserRecord rec;
      rec.record_id = user_id + "r" + std::to_string(r);
      rec.author_id = user_id;
      rec.created_at = post_time - spec.records_per_user - 10 + r;
      rec.source = r % 3 == 0 ? UserRecord::Source::cmv : UserRecord::Source::other_subreddit;
      std::vector<std::string> leaks;
      if (leak_slots.count(r)) leaks = attrs;
      if (poison_slots.count(r)) leaks = {next_attrs[0]};
      std::string text = filler_sentence(rng, 6);
      for (const auto& leak : leaks) text += " " + leak;
      rec.text = text;
      result.world.records[rec.record_id] = leaks;
      inst.full_history.push_back(std::move(rec));
    }

    for (int d = 0; d < spec.deltas_per_instance; ++d) {
      CommentLabel comment;
      comment.comment_id = user_id + "cd" + std::to_string(d);
      comment.label = 1;
      const std::string& target = attrs[d % attrs.size()];
      comment.text = "your view overlooks how " + target + " plays out in practice";
      result.world.comments[comment.comment_id] = {{target}, 1};
      inst.comments.push_back(std::move(comment));
    }
    for (int d = 0; d < spec.nondeltas_per_instance; ++d) {
      CommentLabel comment;
      comment.comment_id = user_id + "cn" + std::to_string(d);
      comment.label = 0;
      if (spec.poison_per_user > 0) {
        // Targets the next user's attribute, which poison records leak.
        const std::string& target = next_attrs[0];
        comment.text = "have you considered " + target + " instead";
        result.world.comments[comment.comment_id] = {{target}, 0};
      } else {
        comment.text = "i disagree, " + filler_sentence(rng, 4);
        result.world.comments[comment.comment_id] = {{}, 0};
      }
      inst.comments.push_back(std::move(comment));
    }

    result.corpus.instances.push_back(std::move(inst));
  }

  result.world.validate();
  return result;
}

void write_world_files(const SyntheticWorld& world, const std::string& dir) {
  world.world.save(dir + "/world.json");

  std::ostringstream threads;
  std::ostringstream histories;
  for (const auto& inst : world.corpus.instances) {
    ojson obj;
    obj["instance_id"] = inst.instance_id;
    obj["user_id"] = inst.user_id;
    obj["post_text"] = inst.post_text;
    obj["post_created_at"] = inst.post_created_at;
    ojson comments = ojson::array();
    for (const auto& c : inst.comments) {
      comments.push_back(ojson{{"comment_id", c.comment_id}, {"text", c.text}, {"label", c.label}});
    }
    obj["comments"] = std::move(comments);
    threads << obj.dump() << "\n";
    for (const auto& rec : inst.full_history) {
      ojson rj;
      rj["record_id"] = rec.record_id;
      rj["author_id"] = rec.author_id;
      rj["text"] = rec.text;
      rj["created_at"] = rec.created_at;
      rj["source"] = source_name(rec.source);
      histories << rj.dump() << "\n";
    }
  }
  write_file_atomic(dir + "/threads.jsonl", threads.str());
  write_file_atomic(dir + "/histories.jsonl", histories.str());
}

}  // namespace persuade
