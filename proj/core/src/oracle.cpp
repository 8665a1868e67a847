#include "persuade/oracle.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "persuade/errors.hpp"
#include "persuade/io.hpp"
#include "persuade/prompts.hpp"
#include "persuade/textutil.hpp"

namespace persuade {

using ojson = nlohmann::ordered_json;
using nlohmann::json;

std::set<std::string> OracleWorld::attribute_vocab() const {
  std::set<std::string> vocab;
  for (const auto& [_, attrs] : users) vocab.insert(attrs.begin(), attrs.end());
  return vocab;
}

void OracleWorld::validate() const {
  if (users.empty()) raise(Errc::invalid_world, "world has no users");
  if (degrade_every < 0) raise(Errc::invalid_world, "degrade_every must be >= 0");
  std::set<std::string> vocab = attribute_vocab();
  for (const auto& [user_id, attrs] : users) {
    if (attrs.empty()) raise(Errc::invalid_world, "user " + user_id + " has no attributes");
    for (const auto& attr : attrs) {
      if (tokenize(attr).size() != 1 || tokenize(attr)[0] != attr)
        raise(Errc::invalid_world, "attribute '" + attr + "' is not a single lowercase token");
    }
  }
  for (const auto& [record_id, leaks] : records) {
    for (const auto& leak : leaks) {
      if (!vocab.count(leak))
        raise(Errc::invalid_world, "record " + record_id + " leaks unknown attribute " + leak);
    }
  }
  for (const auto& [comment_id, spec] : comments) {
    if (spec.label != 0 && spec.label != 1)
      raise(Errc::invalid_world, "comment " + comment_id + " label outside {0,1}");
    for (const auto& target : spec.targets) {
      if (!vocab.count(target))
        raise(Errc::invalid_world, "comment " + comment_id + " targets unknown attribute " + target);
    }
  }
}

OracleWorld OracleWorld::load(const std::string& path) {
  json obj;
  try {
    obj = json::parse(read_text_file(path));
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    raise(Errc::invalid_world, path + ": " + e.what());
  }
  OracleWorld world;
  for (const auto& [user_id, spec] : obj.at("users").items()) {
    world.users[user_id] = spec.at("attributes").get<std::vector<std::string>>();
  }
  if (obj.contains("records")) {
    for (const auto& [record_id, spec] : obj["records"].items()) {
      world.records[record_id] = spec.at("leaks").get<std::vector<std::string>>();
    }
  }
  if (obj.contains("comments")) {
    for (const auto& [comment_id, spec] : obj["comments"].items()) {
      CommentSpec cs;
      cs.targets = spec.at("targets").get<std::vector<std::string>>();
      cs.label = spec.at("label").get<int>();
      world.comments[comment_id] = std::move(cs);
    }
  }
  world.degrade_every = obj.value("degrade_every", 4);
  world.validate();
  return world;
}

void OracleWorld::save(const std::string& path) const {
  ojson obj;
  ojson users_json;
  for (const auto& [user_id, attrs] : users) users_json[user_id] = ojson{{"attributes", attrs}};
  obj["users"] = std::move(users_json);
  ojson records_json = ojson::object();
  for (const auto& [record_id, leaks] : records) records_json[record_id] = ojson{{"leaks", leaks}};
  obj["records"] = std::move(records_json);
  ojson comments_json = ojson::object();
  for (const auto& [comment_id, spec] : comments)
    comments_json[comment_id] = ojson{{"targets", spec.targets}, {"label", spec.label}};
  obj["comments"] = std::move(comments_json);
  obj["degrade_every"] = degrade_every;
  write_file_atomic(path, obj.dump(2) + "\n");
}

BackendConfig oracle_backend(const std::string& world_path, int max_concurrency) {
  OracleWorld::load(world_path);  // validate eagerly
  BackendConfig config;
  config.kind = BackendConfig::Kind::oracle;
  config.model_name = "oracle";
  config.world_path = world_path;
  config.max_concurrency = max_concurrency;
  return config;
}

namespace {

// Slice of `text` between the end of `after` and the start of `before`;
// empty when the markers are absent.
std::string_view between(std::string_view text, std::string_view after,
                         std::string_view before) {
  std::size_t start = text.find(after);
  if (start == std::string_view::npos) return {};
  start += after.size();
  std::size_t stop = before.empty() ? text.size() : text.find(before, start);
  if (stop == std::string_view::npos) return {};
  return text.substr(start, stop - start);
}

class OracleBackend final : public Backend {
 public:
  explicit OracleBackend(const BackendConfig& config)
      : Backend(config.max_concurrency),
        world_(OracleWorld::load(config.world_path)),
        vocab_(world_.attribute_vocab()),
        dim_(config.embed_dim) {}

 protected:
  ChatResult chat_impl(const ChatParams& params) override {
    const std::string& sys = params.system;
    if (sys == prompts::text::kProfilerSystem) return profile_of(params);
    if (sys == prompts::text::kPredictProfileSystem)
      return predict(params, "### User Profile\n");
    if (sys == prompts::text::kPredictHistorySystem)
      return predict(params, "### User History\n");
    if (sys == prompts::text::kPredictPlainSystem) return ChatResult{"no", 0.0};
    if (sys == prompts::text::kStage1System) return stage1(params);
    if (sys == prompts::text::kStage2System) return stage2(params);
    if (sys == prompts::text::kHydeSystem) return hyde(params);
    raise(Errc::unsupported_prompt, "oracle cannot interpret this system prompt");
  }

  std::vector<std::vector<float>> embed_impl(const std::vector<std::string>& texts) override {
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) out.push_back(hashing_embed(text, dim_));
    return out;
  }

 private:
  bool degraded(const ChatParams& params) const {
    if (world_.degrade_every <= 0 || params.temperature <= 0.0 || !params.seed) return false;
    std::int64_t phase = *params.seed % world_.degrade_every;
    if (phase < 0) phase += world_.degrade_every;
    return phase == world_.degrade_every - 1;
  }

  std::vector<std::string> known_attrs(std::string_view text) const {
    std::set<std::string> found;
    for (const auto& token : tokenize(text))
      if (vocab_.count(token)) found.insert(token);
    return {found.begin(), found.end()};
  }

  // First world user whose id appears as a token in `text`.
  const std::string* find_user(std::string_view text) const {
    for (const auto& token : tokenize(text)) {
      auto it = world_.users.find(token);
      if (it != world_.users.end()) return &it->first;
    }
    return nullptr;
  }

  // Latent attributes the persuadee marker in the post points at, plus any
  // attribute tokens literally present.
  std::vector<std::string> salient(std::string_view post) const {
    std::set<std::string> out;
    for (const auto& attr : known_attrs(post)) out.insert(attr);
    if (const std::string* user = find_user(post)) {
      const auto& attrs = world_.users.at(*user);
      out.insert(attrs.begin(), attrs.end());
    }
    return {out.begin(), out.end()};
  }

  ChatResult profile_of(const ChatParams& params) {
    std::string_view passages = between(params.user, "Input Passages:\n", "\n\nOutput:");
    std::vector<std::string> attrs = known_attrs(passages);
    if (attrs.empty() || degraded(params)) return ChatResult{"\xE2\x80\xA2 (no clear signals)", {}};
    std::ostringstream out;
    for (std::size_t i = 0; i < attrs.size(); ++i) {
      if (i > 0) out << "\n";
      out << "\xE2\x80\xA2 " << attrs[i];
    }
    return ChatResult{out.str(), {}};
  }

  ChatResult predict(const ChatParams& params, std::string_view section_header) {
    std::string_view context = between(params.user, section_header, "\n\n### Post\n");
    std::string_view comment = between(params.user, "### Comment\n", "\n\n---\n");
    std::vector<std::string> mentioned = known_attrs(context);
    std::vector<std::string> targeted = known_attrs(comment);
    bool overlap = false;
    for (const auto& attr : targeted) {
      if (std::binary_search(mentioned.begin(), mentioned.end(), attr)) {
        overlap = true;
        break;
      }
    }
    return overlap ? ChatResult{"yes", 1.0} : ChatResult{"no", 0.0};
  }

  ChatResult stage1(const ChatParams& params) {
    std::string_view post = between(params.user, "Post:\n---\n", "\n---\nRespond in ONE question.");
    std::vector<std::string> attrs = salient(post);
    std::ostringstream out;
    out << "What matters to this user regarding";
    for (const auto& attr : attrs) out << " " << attr;
    out << "?";
    return ChatResult{out.str(), {}};
  }

  ChatResult stage2(const ChatParams& params) {
    std::string_view post = between(params.user, "Post:\n---\n", "\n---\nQuestion:");
    std::string_view question = between(params.user, "Question:\n---\n", "\n---\nRespond in ONE sentence.");
    std::set<std::string> terms;
    if (degraded(params)) {
      // Decoy query: names the next user's attributes, which this user's
      // records never contain.
      const std::string* user = find_user(post);
      auto it = user ? std::next(world_.users.find(*user)) : world_.users.begin();
      if (it == world_.users.end()) it = world_.users.begin();
      terms.insert(it->second.begin(), it->second.end());
    } else {
      for (const auto& attr : salient(post)) terms.insert(attr);
      for (const auto& attr : known_attrs(question)) terms.insert(attr);
    }
    std::ostringstream out;
    bool first = true;
    for (const auto& term : terms) {
      if (!first) out << " ";
      out << term;
      first = false;
    }
    if (first) out << "nothing in particular";
    out << ".";
    return ChatResult{out.str(), {}};
  }

  ChatResult hyde(const ChatParams& params) {
    std::string_view post =
        between(params.user, "Post:\n---\n", "\n---\nRespond with ONE hypothetical past record.");
    std::vector<std::string> attrs = salient(post);
    if (attrs.empty()) return ChatResult{"an earlier reflection.", {}};
    std::ostringstream out;
    for (std::size_t i = 0; i < attrs.size(); ++i) {
      if (i > 0) out << " ";
      out << attrs[i];
    }
    return ChatResult{out.str(), {}};
  }

  OracleWorld world_;
  std::set<std::string> vocab_;
  std::size_t dim_;
};

}  // namespace

std::unique_ptr<Backend> make_oracle_backend(const BackendConfig& config) {
  return std::make_unique<OracleBackend>(config);
}

}  // namespace persuade
