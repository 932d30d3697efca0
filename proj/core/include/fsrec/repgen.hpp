#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fsrec/prompt.hpp"

namespace fsrec::repgen {

// LLM-produced (or oracle-produced) summary text for one subject.
struct TextualRepresentation {
  std::string subject_id;
  SubjectKind kind = SubjectKind::kUser;
  std::string text;
  std::string source;  // "remote-llm" | "offline-oracle"
  std::string model_name;
  std::int64_t created_at = 0;  // always 0 for the offline oracle
  bool conforming = true;  // text parses into the labeled fields
};

struct GenerationConfig {
  std::string endpoint = "http://127.0.0.1:8724";
  std::string model_name = "gpt-3.5-turbo";
  double temperature = 0.0;  // keep response variation down by default
  std::size_t max_in_flight = 4;
  std::size_t max_attempts = 3;
  int backoff_initial_ms = 250;  // doubles per retry
  int timeout_seconds = 60;
  std::filesystem::path cache_dir;  // empty disables caching
  bool strict = false;  // retry a nonconforming response once with the
                        // format indicator re-appended
};

// Thrown by the remote path. `retriable` distinguishes transport/5xx
// failures (worth rerunning) from malformed responses.
class GenerationError : public std::runtime_error {
 public:
  GenerationError(const std::string& message, bool retriable)
      : std::runtime_error(message), retriable_(retriable) {}
  bool retriable() const { return retriable_; }

 private:
  bool retriable_;
};

// Field labels demanded by the default format indicator.
std::map<std::string, std::string> parse_labeled_fields(const std::string& text);
bool is_conforming(const std::string& text);

// Remote chat-completion call with retries and content-hash caching.
// Bearer token comes from $FEWSHOT_REC_API_KEY when set.
TextualRepresentation generate(const prompt::PromptSpec& spec,
                               const GenerationConfig& config);

// Deterministic extractive stand-in: top sentences by term frequency within
// the subject's reviews plus a top-weighted keyword list, emitted in the
// same labeled-field layout. Uses only tokens from the input reviews.
TextualRepresentation offline_summarize(const prompt::PromptSpec& spec);

enum class Backend { kRemote, kOffline };
Backend parse_backend(const std::string& name);

struct DeferredSubject {
  std::string subject_id;
  SubjectKind kind = SubjectKind::kUser;
  std::string error;
};

struct GenerateAllResult {
  std::vector<TextualRepresentation> representations;  // prompt order
  std::vector<DeferredSubject> deferred;
  std::size_t cache_hits = 0;
  std::size_t backend_calls = 0;
};

// One representation per subject; permanently failed subjects end up in
// `deferred` instead of aborting the batch. Rerunning with a warm cache is
// free and changes nothing.
GenerateAllResult generate_all(const std::vector<prompt::PromptSpec>& prompts,
                               const GenerationConfig& config, Backend backend);

void save_representations(const std::vector<TextualRepresentation>& reps,
                          const std::filesystem::path& path);
std::vector<TextualRepresentation> load_representations(
    const std::filesystem::path& path);

// Cache key for one prompt: hash of the rendered prompt and model name, so
// editing a prompt invalidates its cached output.
std::string cache_key(const std::string& rendered, const std::string& model_name);

}  // namespace fsrec::repgen
