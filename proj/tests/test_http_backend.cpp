#include <doctest.h>

#include <atomic>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "persuade/errors.hpp"
#include "persuade/gateway.hpp"

using namespace persuade;
using nlohmann::json;

namespace {

// Local chat-completions-style server for exercising the http backend.
class LocalServer {
 public:
  LocalServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      int n = hits_.fetch_add(1);
      if (n < fail_first_) {
        res.status = 429;
        res.set_content("slow down", "text/plain");
        return;
      }
      json body = json::parse(req.body);
      last_model_ = body.value("model", "");
      json choice;
      choice["message"] = json{{"content", response_text_}};
      if (body.value("logprobs", false)) {
        // first-token alternatives, chat-completions style
        choice["logprobs"] = json{
            {"content", json::array({json{
                            {"token", response_text_},
                            {"logprob", std::log(0.75)},
                            {"top_logprobs",
                             json::array({json{{"token", "yes"}, {"logprob", std::log(0.75)}},
                                          json{{"token", "no"}, {"logprob", std::log(0.25)}}})},
                        }})}};
      }
      json reply;
      reply["choices"] = json::array({choice});
      res.set_content(reply.dump(), "application/json");
    });
    server_.Post("/v1/embeddings", [](const httplib::Request& req, httplib::Response& res) {
      json body = json::parse(req.body);
      json data = json::array();
      for (std::size_t i = 0; i < body["input"].size(); ++i) {
        data.push_back(json{{"embedding", {0.1 * (i + 1), 0.2, 0.3}}});
      }
      res.set_content(json{{"data", data}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~LocalServer() {
    server_.stop();
    thread_.join();
  }

  int port() const { return port_; }
  void fail_first(int n) { fail_first_ = n; }
  void respond_with(std::string text) { response_text_ = std::move(text); }
  int hits() const { return hits_.load(); }
  std::string last_model() const { return last_model_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  int fail_first_ = 0;
  std::string response_text_ = "yes";
  std::atomic<int> hits_{0};
  std::string last_model_;
};

BackendConfig http_config(int port) {
  BackendConfig config;
  config.kind = BackendConfig::Kind::http;
  config.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  config.model_name = "test-model";
  config.retry.max_attempts = 3;
  config.retry.backoff_ms = 5;
  config.timeout_sec = 5;
  return config;
}

}  // namespace

TEST_CASE("http backend completes a chat round trip") {
  LocalServer server;
  server.respond_with("no");
  Gateway gateway;
  ChatParams params;
  params.system = "s";
  params.user = "u";
  ChatResult result = gateway.chat(http_config(server.port()), params);
  CHECK(result.text == "no");
  CHECK(server.last_model() == "test-model");
}

TEST_CASE("http backend retries transient 429s then succeeds") {
  LocalServer server;
  server.fail_first(2);
  Gateway gateway;
  ChatParams params;
  params.system = "s";
  params.user = "u";
  ChatResult result = gateway.chat(http_config(server.port()), params);
  CHECK(result.text == "yes");
  CHECK(server.hits() == 3);
}

TEST_CASE("http backend surfaces RateLimited after exhausting retries") {
  LocalServer server;
  server.fail_first(100);
  Gateway gateway;
  ChatParams params;
  params.system = "s";
  params.user = "u";
  bool raised = false;
  try {
    gateway.chat(http_config(server.port()), params);
  } catch (const Error& e) {
    raised = true;
    CHECK(e.code() == Errc::rate_limited);
  }
  CHECK(raised);
  CHECK(server.hits() == 3);
}

TEST_CASE("http backend reports Timeout when the endpoint is unreachable") {
  Gateway gateway;
  BackendConfig config = http_config(1);  // nothing listens on port 1
  config.retry.max_attempts = 2;
  ChatParams params;
  params.system = "s";
  params.user = "u";
  bool raised = false;
  try {
    gateway.chat(config, params);
  } catch (const Error& e) {
    raised = true;
    CHECK(e.code() == Errc::timeout);
  }
  CHECK(raised);
}

TEST_CASE("http backend exposes first-token likelihoods as yes_score") {
  LocalServer server;
  server.respond_with("yes");
  Gateway gateway;
  ScoreOpts opts;
  opts.enabled = true;
  Verdict verdict = gateway.predict_view_change(http_config(server.port()), "the post",
                                                "the comment", PredictContext::plain(), opts);
  CHECK(verdict.value == Verdict::Value::view_changed);
  REQUIRE(verdict.yes_score.has_value());
  CHECK(*verdict.yes_score == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("http backend parses embeddings responses") {
  LocalServer server;
  Gateway gateway;
  auto vectors = gateway.embed(http_config(server.port()), {"a", "b"});
  REQUIRE(vectors.size() == 2);
  CHECK(vectors[0].size() == 3);
  CHECK(vectors[1][0] == doctest::Approx(0.2f));
}
