#include "persuade/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "persuade/errors.hpp"
#include "persuade/hashutil.hpp"
#include "persuade/io.hpp"
#include "persuade/oracle.hpp"
#include "persuade/prompts.hpp"
#include "persuade/textutil.hpp"

namespace persuade {

using nlohmann::json;

std::uint64_t BackendConfig::fingerprint() const {
  return stable_hash(std::string_view("backend"), static_cast<int>(kind), endpoint,
                     model_name, api_key_env, max_concurrency, retry.max_attempts,
                     retry.backoff_ms, fixtures_path, world_path, embed_dim, timeout_sec);
}

PredictContext PredictContext::with_profile(std::string text) {
  PredictContext ctx;
  ctx.kind = Kind::profile;
  ctx.profile = std::move(text);
  return ctx;
}

PredictContext PredictContext::with_history(std::vector<std::string> texts) {
  PredictContext ctx;
  ctx.kind = Kind::history;
  ctx.history = std::move(texts);
  return ctx;
}

// ---------------------------------------------------------------------------
// Backend base: bounded concurrency + request accounting

Backend::Backend(int max_concurrency)
    : limit_(max_concurrency > 0 ? max_concurrency : 1), available_(limit_) {}

class Backend::Gate {
 public:
  explicit Gate(Backend& backend) : backend_(backend) {
    std::unique_lock lock(backend_.mu_);
    backend_.cv_.wait(lock, [&] { return backend_.available_ > 0; });
    --backend_.available_;
    int now = backend_.in_flight_.fetch_add(1) + 1;
    int prev = backend_.max_in_flight_.load();
    while (now > prev && !backend_.max_in_flight_.compare_exchange_weak(prev, now)) {
    }
    backend_.requests_.fetch_add(1);
  }

  ~Gate() {
    backend_.in_flight_.fetch_sub(1);
    {
      std::lock_guard lock(backend_.mu_);
      ++backend_.available_;
    }
    backend_.cv_.notify_one();
  }

 private:
  Backend& backend_;
};

ChatResult Backend::chat(const ChatParams& params) {
  if (params.temperature < 0.0 || params.temperature > 2.0)
    raise(Errc::bad_config, "temperature out of [0,2]");
  if (params.max_tokens <= 0) raise(Errc::bad_config, "max_tokens must be > 0");
  Gate gate(*this);
  return chat_impl(params);
}

std::vector<std::vector<float>> Backend::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) raise(Errc::empty_input, "embed requires at least one text");
  Gate gate(*this);
  auto vectors = embed_impl(texts);
  if (vectors.size() != texts.size())
    raise(Errc::dimension_mismatch, "backend returned wrong vector count");
  for (std::size_t i = 1; i < vectors.size(); ++i) {
    if (vectors[i].size() != vectors[0].size())
      raise(Errc::dimension_mismatch, "inconsistent embedding dimensions");
  }
  return vectors;
}

// ---------------------------------------------------------------------------
// Mock backend: scripted completions keyed by a stable prompt hash

std::string chat_fixture_key(std::string_view system, std::string_view user,
                             double temperature, std::optional<std::int64_t> seed) {
  HashSeq seq;
  seq.add(std::string_view("chat"));
  seq.add(system);
  seq.add(user);
  seq.add(temperature);
  if (seed) {
    seq.add(std::string_view("seed"));
    seq.add(*seed);
  } else {
    seq.add(std::string_view("noseed"));
  }
  return hex64(seq.digest());
}

namespace {

class MockBackend final : public Backend {
 public:
  explicit MockBackend(const BackendConfig& config)
      : Backend(config.max_concurrency), dim_(config.embed_dim) {
    if (!config.fixtures_path.empty()) {
      for_each_line(config.fixtures_path, [&](std::size_t line_no, std::string_view line) {
        json obj;
        try {
          obj = json::parse(line);
        } catch (const std::exception& e) {
          raise(Errc::schema_violation,
                config.fixtures_path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        Entry entry;
        entry.response = obj.at("response").get<std::string>();
        if (obj.contains("yes_prob")) entry.yes_prob = obj["yes_prob"].get<double>();
        fixtures_[obj.at("key_hash").get<std::string>()] = std::move(entry);
      });
    }
  }

 protected:
  ChatResult chat_impl(const ChatParams& params) override {
    std::string key = chat_fixture_key(params.system, params.user, params.temperature,
                                       params.seed);
    auto it = fixtures_.find(key);
    if (it == fixtures_.end())
      raise(Errc::fixture_miss, "no fixture for key " + key);
    return {it->second.response, it->second.yes_prob};
  }

  std::vector<std::vector<float>> embed_impl(const std::vector<std::string>& texts) override {
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) out.push_back(hashing_embed(text, dim_));
    return out;
  }

 private:
  struct Entry {
    std::string response;
    std::optional<double> yes_prob;
  };
  std::unordered_map<std::string, Entry> fixtures_;
  std::size_t dim_;
};

// ---------------------------------------------------------------------------
// HTTP backend: chat-completions-style JSON API with bounded retries

struct SplitUrl {
  std::string host;    // scheme://authority
  std::string prefix;  // path prefix, may be empty
};

SplitUrl split_endpoint(const std::string& endpoint) {
  auto scheme = endpoint.find("://");
  if (scheme == std::string::npos) raise(Errc::bad_config, "endpoint missing scheme: " + endpoint);
  auto slash = endpoint.find('/', scheme + 3);
  if (slash == std::string::npos) return {endpoint, ""};
  return {endpoint.substr(0, slash), endpoint.substr(slash)};
}

bool retryable_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(const BackendConfig& config)
      : Backend(config.max_concurrency), config_(config), url_(split_endpoint(config.endpoint)) {
    if (config.endpoint.empty()) raise(Errc::bad_config, "http backend requires endpoint");
  }

 protected:
  ChatResult chat_impl(const ChatParams& params) override {
    json body;
    body["model"] = config_.model_name;
    body["messages"] = json::array({
        json{{"role", "system"}, {"content", params.system}},
        json{{"role", "user"}, {"content", params.user}},
    });
    body["temperature"] = params.temperature;
    body["max_tokens"] = params.max_tokens;
    if (params.seed) body["seed"] = *params.seed;
    if (params.logprobs) {
      body["logprobs"] = true;
      body["top_logprobs"] = 5;
    }

    json response = post_with_retries("/chat/completions", body);
    try {
      const json& choice = response.at("choices").at(0);
      ChatResult result;
      result.text = choice.at("message").at("content").get<std::string>();
      result.yes_prob = extract_yes_prob(choice);
      return result;
    } catch (const json::exception& e) {
      raise(Errc::schema_violation, std::string("unexpected chat response shape: ") + e.what());
    }
  }

  std::vector<std::vector<float>> embed_impl(const std::vector<std::string>& texts) override {
    json body;
    body["model"] = config_.model_name;
    body["input"] = texts;
    json response = post_with_retries("/embeddings", body);
    try {
      std::vector<std::vector<float>> out;
      for (const auto& item : response.at("data")) {
        out.push_back(item.at("embedding").get<std::vector<float>>());
      }
      return out;
    } catch (const json::exception& e) {
      raise(Errc::schema_violation,
            std::string("unexpected embeddings response shape: ") + e.what());
    }
  }

 private:
  json post_with_retries(const std::string& path, const json& body) {
    httplib::Client client(url_.host);
    client.set_connection_timeout(config_.timeout_sec, 0);
    client.set_read_timeout(config_.timeout_sec, 0);
    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
      if (const char* key = std::getenv(config_.api_key_env.c_str())) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
      }
    }

    const std::string payload = body.dump();
    int last_status = 0;
    int attempts = std::max(1, config_.retry.max_attempts);
    for (int attempt = 0; attempt < attempts; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(
            std::chrono::milliseconds(config_.retry.backoff_ms << (attempt - 1)));
      }
      auto res = client.Post(url_.prefix + path, headers, payload, "application/json");
      if (!res) {
        last_status = 0;  // connection error or timeout
        continue;
      }
      last_status = res->status;
      if (res->status == 200) {
        try {
          return json::parse(res->body);
        } catch (const std::exception& e) {
          raise(Errc::schema_violation, std::string("bad response body: ") + e.what());
        }
      }
      if (!retryable_status(res->status)) {
        raise(Errc::io_error, "http status " + std::to_string(res->status) + " from " + path);
      }
    }
    if (last_status == 429)
      raise(Errc::rate_limited, "gave up after " + std::to_string(attempts) + " attempts");
    raise(Errc::timeout, "gave up after " + std::to_string(attempts) + " attempts (last status " +
                             std::to_string(last_status) + ")");
  }

  static std::string normalize_token(std::string token) {
    std::string out;
    for (char c : token) {
      if (std::isalnum(static_cast<unsigned char>(c)))
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
  }

  // Derives P("yes") from first-token logprobs when present in the response.
  static std::optional<double> extract_yes_prob(const json& choice) {
    if (!choice.contains("logprobs") || choice["logprobs"].is_null()) return std::nullopt;
    const json& content = choice["logprobs"].value("content", json::array());
    if (content.empty()) return std::nullopt;
    const json& first = content.at(0);
    double p_yes = -1.0, p_no = -1.0;
    if (first.contains("top_logprobs")) {
      for (const auto& cand : first["top_logprobs"]) {
        std::string token = normalize_token(cand.value("token", ""));
        double prob = std::exp(cand.value("logprob", -1e9));
        if (token == "yes" && prob > p_yes) p_yes = prob;
        if (token == "no" && prob > p_no) p_no = prob;
      }
    }
    if (p_yes < 0.0 && p_no < 0.0) {
      std::string token = normalize_token(first.value("token", ""));
      double prob = std::exp(first.value("logprob", -1e9));
      if (token == "yes") return prob;
      if (token == "no") return 1.0 - prob;
      return std::nullopt;
    }
    if (p_yes < 0.0) p_yes = 0.0;
    if (p_no < 0.0) p_no = 0.0;
    if (p_yes + p_no <= 0.0) return std::nullopt;
    return p_yes / (p_yes + p_no);
  }

  BackendConfig config_;
  SplitUrl url_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Verdict parsing

Verdict parse_verdict(const std::string& raw_text, std::optional<double> yes_prob) {
  std::size_t begin = 0;
  while (begin < raw_text.size() && std::isspace(static_cast<unsigned char>(raw_text[begin])))
    ++begin;
  std::size_t end = begin;
  while (end < raw_text.size() && !std::isspace(static_cast<unsigned char>(raw_text[end])))
    ++end;
  std::string token;
  for (std::size_t i = begin; i < end; ++i) {
    unsigned char c = static_cast<unsigned char>(raw_text[i]);
    if (std::isalnum(c)) token.push_back(static_cast<char>(std::tolower(c)));
  }

  Verdict verdict;
  verdict.raw_text = raw_text;
  verdict.yes_score = yes_prob;
  if (token == "yes") {
    verdict.value = Verdict::Value::view_changed;
  } else if (token == "no") {
    verdict.value = Verdict::Value::unchanged;
  } else {
    raise(Errc::unparseable_verdict, "first token '" + token + "' is not yes/no");
  }
  return verdict;
}

// ---------------------------------------------------------------------------
// Gateway facade

Backend& Gateway::backend(const BackendConfig& config) {
  std::uint64_t key = config.fingerprint();
  std::lock_guard lock(mu_);
  auto it = backends_.find(key);
  if (it != backends_.end()) return *it->second;

  std::unique_ptr<Backend> created;
  switch (config.kind) {
    case BackendConfig::Kind::mock:
      created = std::make_unique<MockBackend>(config);
      break;
    case BackendConfig::Kind::http:
      created = std::make_unique<HttpBackend>(config);
      break;
    case BackendConfig::Kind::oracle:
      created = make_oracle_backend(config);
      break;
  }
  Backend& ref = *created;
  backends_.emplace(key, std::move(created));
  return ref;
}

ChatResult Gateway::chat(const BackendConfig& config, const ChatParams& params) {
  return backend(config).chat(params);
}

std::vector<std::vector<float>> Gateway::embed(const BackendConfig& config,
                                               const std::vector<std::string>& texts) {
  return backend(config).embed(texts);
}

Verdict Gateway::predict_view_change(const BackendConfig& config, const std::string& post,
                                     const std::string& comment, const PredictContext& context,
                                     const ScoreOpts& score) {
  if (trim(post).empty() || trim(comment).empty())
    raise(Errc::empty_input, "post and comment must be non-empty");

  prompts::Rendered rendered;
  switch (context.kind) {
    case PredictContext::Kind::profile:
      rendered = prompts::predict_with_profile(context.profile, post, comment);
      break;
    case PredictContext::Kind::history:
      rendered = prompts::predict_with_history(prompts::passages_block(context.history), post,
                                               comment);
      break;
    case PredictContext::Kind::none:
      rendered = prompts::predict_plain(post, comment);
      break;
  }

  ChatParams params;
  params.temperature = 0.0;
  params.max_tokens = 8;
  params.seed = score.seed;
  params.system = rendered.system;
  params.user = rendered.user;
  params.logprobs = score.enabled;

  ChatResult result = chat(config, params);
  Verdict verdict = parse_verdict(result.text, result.yes_prob);

  if (score.enabled && !verdict.yes_score) {
    // Frequency estimator over n_score independent samples; sample 0 is the
    // main call. n_score == 1 degenerates to {0, 1} scores.
    int yes = verdict.value == Verdict::Value::view_changed ? 1 : 0;
    int n = std::max(1, score.n_score);
    for (int i = 1; i < n; ++i) {
      ChatParams extra = params;
      extra.logprobs = false;
      extra.seed = static_cast<std::int64_t>(
          stable_hash(std::string_view("score-sample"), score.seed.value_or(0), i));
      Verdict sampled = parse_verdict(chat(config, extra).text);
      yes += sampled.value == Verdict::Value::view_changed ? 1 : 0;
    }
    verdict.yes_score = static_cast<double>(yes) / static_cast<double>(n);
  }
  return verdict;
}

std::uint64_t Gateway::request_count() const {
  std::lock_guard lock(mu_);
  std::uint64_t total = 0;
  for (const auto& [_, backend] : backends_) total += backend->request_count();
  return total;
}

}  // namespace persuade
