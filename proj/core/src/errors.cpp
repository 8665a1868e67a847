#include "persuade/errors.hpp"

namespace persuade {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::file_unreadable: return "FileUnreadable";
    case Errc::schema_violation: return "SchemaViolation";
    case Errc::empty_corpus: return "EmptyCorpus";
    case Errc::bad_ratios: return "BadRatios";
    case Errc::retriever_unavailable: return "RetrieverUnavailable";
    case Errc::timeout: return "Timeout";
    case Errc::rate_limited: return "RateLimited";
    case Errc::fixture_miss: return "FixtureMiss";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::unparseable_verdict: return "UnparseableVerdict";
    case Errc::invalid_world: return "InvalidWorld";
    case Errc::unsupported_prompt: return "UnsupportedPrompt";
    case Errc::empty_input: return "EmptyInput";
    case Errc::key_set_mismatch: return "KeySetMismatch";
    case Errc::missing_query_text: return "MissingQueryText";
    case Errc::missing_utility: return "MissingUtility";
    case Errc::missing_relevance: return "MissingRelevance";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::single_class: return "SingleClass";
    case Errc::zero_variance: return "ZeroVariance";
    case Errc::empty_profile: return "EmptyProfile";
    case Errc::io_error: return "IoError";
    case Errc::bad_config: return "BadConfig";
  }
  return "UnknownError";
}

}  // namespace persuade
