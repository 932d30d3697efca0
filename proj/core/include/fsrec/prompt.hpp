#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fsrec/corpus.hpp"

namespace fsrec {

enum class SubjectKind { kUser, kItem };

std::string to_string(SubjectKind kind);
SubjectKind subject_kind_from_string(const std::string& name);

}  // namespace fsrec

namespace fsrec::prompt {

struct TokenBudget {
  std::size_t max_units = 3000;
  std::string counting_rule = "cjk-char+word-v1";
};

// Framing cost charged per injected review ("Review N: " plus separators).
inline constexpr std::size_t kReviewFramingUnits = 4;

// Suffix texts live in config, not code, so the wording can be swapped
// (e.g. translated) without a rebuild. The defaults below are English
// reconstructions of the original Chinese task descriptions.
struct PromptConfig {
  std::string user_suffix =
      "The reviews above were all written by one user. Based on your "
      "understanding of these movie reviews, summarize the user's movie "
      "preferences, then associate and infer the user's favorite movie "
      "genres, actors, and directors. Exclusively focus on the materials "
      "provided by us.";
  std::string item_suffix =
      "The reviews above are all about one movie. Based on your "
      "understanding of these movie reviews, summarize the movie's tags and "
      "scenes, then associate and infer what type of audience and fans may "
      "be attracted by this movie. Exclusively focus on the materials "
      "provided by us.";
  std::string format_indicator =
      "Answer with exactly two labeled lines and nothing else:\n"
      "Summary: <one concise paragraph>\n"
      "Keywords: <comma-separated keywords>";
  std::size_t budget_units = 3000;
};

// JSON file with keys user_suffix, item_suffix, format_indicator,
// budget_units; missing keys keep their defaults.
PromptConfig load_prompt_config(const std::filesystem::path& path);
void save_prompt_config(const PromptConfig& config, const std::filesystem::path& path);

// A fully assembled chat prompt: ordered review injection followed by the
// task suffix (task description + format indicator), within budget.
struct PromptSpec {
  std::string subject_id;
  SubjectKind kind = SubjectKind::kUser;
  std::vector<std::string> reviews;  // chronological, oldest first
  std::string suffix_text;
  TokenBudget budget;

  // Reviews first, suffix last.
  std::string render() const;
  std::size_t rendered_units() const;
};

// Drops whole reviews from the oldest end until the injected reviews fit in
// `review_budget` units (framing included). The newest review is never
// dropped; if it alone exceeds the budget it is truncated to fit.
std::vector<std::string> apply_limiter(const std::vector<std::string>& reviews,
                                       std::size_t review_budget);

PromptSpec build_user_prompt(const std::string& user_id,
                             const std::vector<std::string>& reviews,
                             const PromptConfig& config);
PromptSpec build_item_prompt(const std::string& item_id,
                             const std::vector<std::string>& reviews,
                             const PromptConfig& config);

// One prompt per cohort user and one per item in item_train, review
// sequences in chronological order. Deterministic output order (users
// sorted, then items sorted).
std::vector<PromptSpec> build_all_prompts(const corpus::SplitBundle& splits,
                                          const PromptConfig& config);

void save_prompts(const std::vector<PromptSpec>& prompts,
                  const std::filesystem::path& path);
std::vector<PromptSpec> load_prompts(const std::filesystem::path& path);

}  // namespace fsrec::prompt
