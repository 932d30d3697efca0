#include "fsrec/prompt.hpp"

#include <stdexcept>

#include "fsrec/text.hpp"
#include "jsonl_util.hpp"

namespace fsrec {

std::string to_string(SubjectKind kind) {
  return kind == SubjectKind::kUser ? "user" : "item";
}

SubjectKind subject_kind_from_string(const std::string& name) {
  if (name == "user") return SubjectKind::kUser;
  if (name == "item") return SubjectKind::kItem;
  throw std::invalid_argument("unknown subject kind: " + name);
}

}  // namespace fsrec

namespace fsrec::prompt {

namespace {

std::size_t review_cost(const std::string& review) {
  return count_units(review) + kReviewFramingUnits;
}

PromptSpec build_prompt(const std::string& subject_id, SubjectKind kind,
                        const std::vector<std::string>& reviews,
                        const PromptConfig& config) {
  if (reviews.empty()) {
    throw std::invalid_argument("no reviews for " + to_string(kind) + " " + subject_id);
  }
  std::string suffix;
  const std::string& task = kind == SubjectKind::kUser ? config.user_suffix
                                                       : config.item_suffix;
  suffix = task + "\n" + config.format_indicator;
  const std::size_t suffix_cost = count_units(suffix);
  if (config.budget_units <= suffix_cost) {
    throw std::invalid_argument("budget " + std::to_string(config.budget_units) +
                                " units does not exceed the suffix cost " +
                                std::to_string(suffix_cost));
  }
  PromptSpec spec;
  spec.subject_id = subject_id;
  spec.kind = kind;
  spec.reviews = apply_limiter(reviews, config.budget_units - suffix_cost);
  spec.suffix_text = std::move(suffix);
  spec.budget.max_units = config.budget_units;
  return spec;
}

}  // namespace

PromptConfig load_prompt_config(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  detail::ordered_json doc;
  in >> doc;
  PromptConfig config;
  config.user_suffix = doc.value("user_suffix", config.user_suffix);
  config.item_suffix = doc.value("item_suffix", config.item_suffix);
  config.format_indicator = doc.value("format_indicator", config.format_indicator);
  config.budget_units = doc.value("budget_units", config.budget_units);
  return config;
}

void save_prompt_config(const PromptConfig& config, const std::filesystem::path& path) {
  detail::ordered_json doc;
  doc["user_suffix"] = config.user_suffix;
  doc["item_suffix"] = config.item_suffix;
  doc["format_indicator"] = config.format_indicator;
  doc["budget_units"] = config.budget_units;
  auto out = detail::open_output(path);
  out << doc.dump(2) << "\n";
}

std::string PromptSpec::render() const {
  std::string out;
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    out += "Review " + std::to_string(i + 1) + ": " + reviews[i] + "\n";
  }
  out += "\n" + suffix_text;
  return out;
}

std::size_t PromptSpec::rendered_units() const { return count_units(render()); }

std::vector<std::string> apply_limiter(const std::vector<std::string>& reviews,
                                       std::size_t review_budget) {
  if (reviews.empty()) throw std::invalid_argument("apply_limiter: no reviews");

  std::size_t total = 0;
  for (const std::string& r : reviews) total += review_cost(r);
  if (total <= review_budget) return reviews;

  // Drop from the oldest end; held-out items are the newest interactions,
  // so recency is what the prompt must keep.
  std::size_t first = 0;
  while (first + 1 < reviews.size() && total > review_budget) {
    total -= review_cost(reviews[first]);
    ++first;
  }
  std::vector<std::string> kept(reviews.begin() + static_cast<std::ptrdiff_t>(first),
                                reviews.end());
  if (total > review_budget) {
    // Only the newest review is left and it still does not fit.
    const std::size_t content_budget =
        review_budget > kReviewFramingUnits ? review_budget - kReviewFramingUnits : 0;
    kept.back() = truncate_to_units(kept.back(), content_budget);
  }
  return kept;
}

PromptSpec build_user_prompt(const std::string& user_id,
                             const std::vector<std::string>& reviews,
                             const PromptConfig& config) {
  return build_prompt(user_id, SubjectKind::kUser, reviews, config);
}

PromptSpec build_item_prompt(const std::string& item_id,
                             const std::vector<std::string>& reviews,
                             const PromptConfig& config) {
  return build_prompt(item_id, SubjectKind::kItem, reviews, config);
}

std::vector<PromptSpec> build_all_prompts(const corpus::SplitBundle& splits,
                                          const PromptConfig& config) {
  std::vector<PromptSpec> prompts;
  prompts.reserve(splits.user_train.size() + splits.item_train.size());
  for (const auto& [user_id, train] : splits.user_train) {
    std::vector<std::string> reviews;
    reviews.reserve(train.size());
    for (const Interaction& x : train) reviews.push_back(x.review);
    prompts.push_back(build_user_prompt(user_id, reviews, config));
  }
  for (const auto& [item_id, samples] : splits.item_train) {
    std::vector<std::string> reviews;
    reviews.reserve(samples.size());
    for (const Interaction& x : samples) reviews.push_back(x.review);
    prompts.push_back(build_item_prompt(item_id, reviews, config));
  }
  return prompts;
}

void save_prompts(const std::vector<PromptSpec>& prompts,
                  const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (const PromptSpec& p : prompts) {
    detail::ordered_json row;
    row["subject_id"] = p.subject_id;
    row["kind"] = to_string(p.kind);
    row["reviews"] = p.reviews;
    row["suffix"] = p.suffix_text;
    row["budget_units"] = p.budget.max_units;
    row["rendered"] = p.render();
    out << row.dump() << "\n";
  }
}

std::vector<PromptSpec> load_prompts(const std::filesystem::path& path) {
  std::vector<PromptSpec> prompts;
  detail::for_each_jsonl(path, [&](const detail::ordered_json& row) {
    PromptSpec p;
    p.subject_id = row.at("subject_id").get<std::string>();
    p.kind = subject_kind_from_string(row.at("kind").get<std::string>());
    p.reviews = row.at("reviews").get<std::vector<std::string>>();
    p.suffix_text = row.at("suffix").get<std::string>();
    p.budget.max_units = row.at("budget_units").get<std::size_t>();
    prompts.push_back(std::move(p));
  });
  return prompts;
}

}  // namespace fsrec::prompt
