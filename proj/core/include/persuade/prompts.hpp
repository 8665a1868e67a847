#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace persuade::prompts {

struct Rendered {
  std::string system;
  std::string user;
};

// Raw template text, exposed so the oracle backend and the golden-file tests
// can match against the exact assets.
namespace text {
extern const char* const kPredictProfileSystem;
extern const char* const kPredictProfileUser;
extern const char* const kPredictHistorySystem;
extern const char* const kPredictHistoryUser;
extern const char* const kPredictPlainSystem;
extern const char* const kPredictPlainUser;
extern const char* const kProfilerSystem;
extern const char* const kProfilerUser;
extern const char* const kStage1System;
extern const char* const kStage1User;
extern const char* const kStage2System;
extern const char* const kStage2User;
extern const char* const kHydeSystem;
extern const char* const kHydeUser;
}  // namespace text

// Single-pass slot substitution: {name} markers are replaced once, and
// substituted text is never rescanned, so slot-like sequences inside user
// content pass through untouched.
std::string render(std::string_view tmpl,
                   const std::vector<std::pair<std::string_view, std::string_view>>& slots);

Rendered predict_with_profile(std::string_view profile, std::string_view post,
                              std::string_view comment);
Rendered predict_with_history(std::string_view history_block, std::string_view post,
                              std::string_view comment);
Rendered predict_plain(std::string_view post, std::string_view comment);
Rendered profiler(std::string_view post, std::string_view passages_block);
Rendered stage1_question(std::string_view post);
Rendered stage2_query(std::string_view post, std::string_view question);
Rendered hyde(std::string_view post);

// Numbered passage block: "[1] ...\n\n[2] ..." in the given order.
std::string passages_block(const std::vector<std::string>& texts);

}  // namespace persuade::prompts
