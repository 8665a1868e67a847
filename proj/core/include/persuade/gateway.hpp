#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace persuade {

struct ChatParams {
  double temperature = 0.0;  // [0, 2]
  int max_tokens = 512;
  std::optional<std::int64_t> seed;
  std::string system;
  std::string user;
  bool logprobs = false;  // http backend only; asks for first-token likelihoods
};

struct ChatResult {
  std::string text;
  // P("yes") for predictor-style calls when the backend exposes token
  // likelihoods; absent otherwise.
  std::optional<double> yes_prob;
};

struct RetryPolicy {
  int max_attempts = 3;
  int backoff_ms = 100;  // doubles per attempt
};

struct BackendConfig {
  enum class Kind { http, mock, oracle };
  Kind kind = Kind::mock;
  std::string endpoint;      // http: base URL incl. any path prefix, e.g. http://host:8080/v1
  std::string model_name;
  std::string api_key_env;   // env var holding the bearer token (http)
  int max_concurrency = 4;
  RetryPolicy retry;
  std::string fixtures_path; // mock: jsonl of {key_hash, response, yes_prob?}
  std::string world_path;    // oracle: world.json
  int embed_dim = 64;        // mock/oracle hashing-embedder dimensionality
  int timeout_sec = 30;      // http read timeout

  std::uint64_t fingerprint() const;
};

struct Verdict {
  enum class Value { view_changed, unchanged };
  Value value = Value::unchanged;
  std::string raw_text;
  std::optional<double> yes_score;
};

// Context handed to the view-change predictor; selects the prompt variant.
struct PredictContext {
  enum class Kind { profile, history, none };
  Kind kind = Kind::none;
  std::string profile;                // kind == profile
  std::vector<std::string> history;   // kind == history (raw record texts)

  static PredictContext with_profile(std::string text);
  static PredictContext with_history(std::vector<std::string> texts);
  static PredictContext plain() { return {}; }
};

struct ScoreOpts {
  bool enabled = false;  // populate Verdict::yes_score
  int n_score = 1;       // samples for the frequency estimator fallback
  std::optional<std::int64_t> seed;
};

class Backend {
 public:
  virtual ~Backend() = default;

  ChatResult chat(const ChatParams& params);
  std::vector<std::vector<float>> embed(const std::vector<std::string>& texts);

  std::uint64_t request_count() const { return requests_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }

 protected:
  explicit Backend(int max_concurrency);
  virtual ChatResult chat_impl(const ChatParams& params) = 0;
  virtual std::vector<std::vector<float>> embed_impl(const std::vector<std::string>& texts) = 0;

 private:
  class Gate;
  int limit_;
  std::mutex mu_;
  std::condition_variable cv_;
  int available_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  std::atomic<std::uint64_t> requests_{0};
};

// Stable fixture key for scripting mock completions.
std::string chat_fixture_key(std::string_view system, std::string_view user,
                             double temperature, std::optional<std::int64_t> seed);

// First-token verdict parsing: lowercase, strip punctuation, "yes"/"no".
Verdict parse_verdict(const std::string& raw_text, std::optional<double> yes_prob = {});

// Uniform entry point to all model backends. Thread-safe; backend instances
// are created lazily and cached by config fingerprint.
class Gateway {
 public:
  Gateway() = default;
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  Backend& backend(const BackendConfig& config);

  ChatResult chat(const BackendConfig& config, const ChatParams& params);
  std::vector<std::vector<float>> embed(const BackendConfig& config,
                                        const std::vector<std::string>& texts);

  Verdict predict_view_change(const BackendConfig& config, const std::string& post,
                              const std::string& comment, const PredictContext& context,
                              const ScoreOpts& score = {});

  std::uint64_t request_count() const;

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::uint64_t, std::unique_ptr<Backend>> backends_;
};

}  // namespace persuade
