#pragma once

#include <stdexcept>
#include <string>

namespace persuade {

// Error categories surfaced by the library. Callers match on code(), the
// message carries context (file, line number, offending value).
enum class Errc {
  file_unreadable,
  schema_violation,
  empty_corpus,
  bad_ratios,
  retriever_unavailable,
  timeout,
  rate_limited,
  fixture_miss,
  dimension_mismatch,
  unparseable_verdict,
  invalid_world,
  unsupported_prompt,
  empty_input,
  key_set_mismatch,
  missing_query_text,
  missing_utility,
  missing_relevance,
  length_mismatch,
  single_class,
  zero_variance,
  empty_profile,
  io_error,
  bad_config,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace persuade
