#include "persuade/prompts.hpp"

#include <sstream>

namespace persuade::prompts {

namespace text {

const char* const kPredictProfileSystem =
    "You are the author of the post. The section labeled \"User Profile\" is your profile — it describes who you are.\n"
    "\n"
    "Read it carefully and fully adopt this as your identity and mindset.\n"
    "\n"
    "You will then be shown a post you wrote, and a comment written in response to it. Based on your profile, determine whether the comment would change your mind from the opinion expressed in the post.\n"
    "\n"
    "Respond only with one word: \"yes\" if your mind would change after reading the comment, or \"no\" if not. Do not provide any explanation or reasoning.";

const char* const kPredictProfileUser =
    "### User Profile\n"
    "{user_profile}\n"
    "\n"
    "### Post\n"
    "{post}\n"
    "\n"
    "### Comment\n"
    "{comment}\n"
    "\n"
    "---\n"
    "Would this comment change your mind from the opinion you expressed in the post?\n"
    "\n"
    "Respond only with one word: \"yes\" or \"no\".";

const char* const kPredictHistorySystem =
    "You are the author of the post. The section labeled \"User History\" is relevant past history about you.\n"
    "\n"
    "Read it carefully and incorporate it into your identity and mindset.\n"
    "\n"
    "You will then be shown a post you wrote, and a comment written in response to it. Based on your history, determine whether the comment would change your mind from the opinion expressed in the post.\n"
    "\n"
    "Respond only with one word: \"yes\" if your mind would change after reading the comment, or \"no\" if not. Do not provide any explanation or reasoning.";

const char* const kPredictHistoryUser =
    "### User History\n"
    "{user_profile}\n"
    "\n"
    "### Post\n"
    "{post}\n"
    "\n"
    "### Comment\n"
    "{comment}\n"
    "\n"
    "---\n"
    "Would this comment change your mind from the opinion you expressed in the post?\n"
    "\n"
    "Respond only with one word: \"yes\" or \"no\".";

const char* const kPredictPlainSystem =
    "You are the author of the post. Carefully read your own post and the comment written in response to it.\n"
    "\n"
    "Decide whether you would change your mind after reading the comment.\n"
    "\n"
    "Ignore your own beliefs as a language model and fully adopt the mindset of the person who wrote the post.\n"
    "\n"
    "Respond with only one word: \"yes\" if you think you would change your mind, or \"no\" if not. Do not provide any explanation or reasoning.";

const char* const kPredictPlainUser =
    "[Post]\n"
    "{post}\n"
    "\n"
    "[Comment]\n"
    "{comment}\n"
    "\n"
    "Would you change your mind after reading the comment?";

const char* const kProfilerSystem =
    "You are an expert assistant whose task is to extract concise, high-level information about the author of a set of passages.\n"
    "\n"
    "Focus only on traits that would be most useful for persuading or changing the author's view in relation to the current post.\n"
    "\n"
    "Your goal is to produce a compact, context-aware user profile optimized for persuasive messaging toward the given post.";

const char* const kProfilerUser =
    "You are given a set of passages written by the same author, along with the author's current post.\n"
    "\n"
    "Extract only the most essential information about the author that is clearly stated or strongly and consistently implied across multiple passages, focusing on traits that are most relevant for understanding how to persuade them in the context of the current post.\n"
    "\n"
    "Instructions:\n"
    "  - Consider the current post as the immediate context in which persuasion would occur.\n"
    "  - Identify attitudes, reasoning patterns, or sensitivities that could influence how the author might respond to persuasion regarding the post.\n"
    "  - Do not guess or speculate beyond what is well supported.\n"
    "  - Exclude personally identifying or sensitive details unless explicitly stated.\n"
    "  - Generalize from specific events or examples into higher-level traits; avoid direct quotes or low-level details.\n"
    "  - Remove redundancy and keep bullets concise.\n"
    "  - Do NOT respond with anything other than the bullet points.\n"
    "\n"
    "Current Post:\n"
    "{post}\n"
    "\n"
    "Input Passages:\n"
    "{passages}\n"
    "\n"
    "Output:\n"
    "  • ...\n"
    "  • ...";

const char* const kStage1System =
    "You will be given an online post where a user explains their view on a specific topic.\n"
    "Write ONE short question that asks for information regarding the user that is NOT explicitly stated in the post, but would be important for persuading the user expressed in the post.\n"
    "The question should focus on aspects such as the user's values, experiences, priorities, or decision making styles related to the topic.\n"
    "\n"
    "Instructions:\n"
    "  - Output MUST be a single question sentence ending with \"?\".\n"
    "  - Do NOT explain your reasoning.\n"
    "  - Do NOT ask for information already provided in the post.";

const char* const kStage1User =
    "Post:\n"
    "---\n"
    "{post}\n"
    "---\n"
    "Respond in ONE question.";

const char* const kStage2System =
    "You will be given two inputs:\n"
    "(1) an online post where a user explains their view on a specific topic.\n"
    "(2) a question asking for information that is NOT explicitly stated in the post, but is important for persuading the user in this situation.\n"
    "\n"
    "Write ONE sentence that incorporates:\n"
    "  - what the question is asking about the user\n"
    "  - the most important cues from the post\n"
    "The sentence should clearly reflect what the question asks about the user, while also grounding it in the most important cues from the post.\n"
    "\n"
    "Instructions:\n"
    "  - Output MUST be a single sentence.\n"
    "  - Do NOT explain your reasoning.";

const char* const kStage2User =
    "Post:\n"
    "---\n"
    "{post}\n"
    "---\n"
    "Question:\n"
    "---\n"
    "{question}\n"
    "---\n"
    "Respond in ONE sentence.";

// Hypothetical-record prompt; not a published asset, kept minimal.
const char* const kHydeSystem =
    "You will be given an online post where a user explains their view on a specific topic.\n"
    "Write a short, plausible past post or comment that the same user might have written before, one that would be relevant to persuading them about the current post.\n"
    "Respond with only the hypothetical record text.";

const char* const kHydeUser =
    "Post:\n"
    "---\n"
    "{post}\n"
    "---\n"
    "Respond with ONE hypothetical past record.";

}  // namespace text

std::string render(std::string_view tmpl,
                   const std::vector<std::pair<std::string_view, std::string_view>>& slots) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    std::size_t open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    std::size_t close = tmpl.find('}', open + 1);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    std::string_view name = tmpl.substr(open + 1, close - open - 1);
    const std::string_view* value = nullptr;
    for (const auto& [slot, text] : slots) {
      if (slot == name) {
        value = &text;
        break;
      }
    }
    out.append(tmpl.substr(pos, open - pos));
    if (value) {
      out.append(*value);
      pos = close + 1;
    } else {
      out.push_back('{');
      pos = open + 1;
    }
  }
  return out;
}

Rendered predict_with_profile(std::string_view profile, std::string_view post,
                              std::string_view comment) {
  return {text::kPredictProfileSystem,
          render(text::kPredictProfileUser,
                 {{"user_profile", profile}, {"post", post}, {"comment", comment}})};
}

Rendered predict_with_history(std::string_view history_block, std::string_view post,
                              std::string_view comment) {
  return {text::kPredictHistorySystem,
          render(text::kPredictHistoryUser,
                 {{"user_profile", history_block}, {"post", post}, {"comment", comment}})};
}

Rendered predict_plain(std::string_view post, std::string_view comment) {
  return {text::kPredictPlainSystem,
          render(text::kPredictPlainUser, {{"post", post}, {"comment", comment}})};
}

Rendered profiler(std::string_view post, std::string_view passages) {
  return {text::kProfilerSystem,
          render(text::kProfilerUser, {{"post", post}, {"passages", passages}})};
}

Rendered stage1_question(std::string_view post) {
  return {text::kStage1System, render(text::kStage1User, {{"post", post}})};
}

Rendered stage2_query(std::string_view post, std::string_view question) {
  return {text::kStage2System,
          render(text::kStage2User, {{"post", post}, {"question", question}})};
}

Rendered hyde(std::string_view post) {
  return {text::kHydeSystem, render(text::kHydeUser, {{"post", post}})};
}

std::string passages_block(const std::vector<std::string>& texts) {
  std::ostringstream out;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (i > 0) out << "\n\n";
    out << "[" << (i + 1) << "] " << texts[i];
  }
  return out.str();
}

}  // namespace persuade::prompts
