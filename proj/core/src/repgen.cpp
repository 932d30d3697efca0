#include "fsrec/repgen.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "fsrec/text.hpp"
#include "fsrec/thread_pool.hpp"
#include "httplib.h"
#include "jsonl_util.hpp"

namespace fsrec::repgen {

namespace {

constexpr const char* kSummaryLabel = "Summary:";
constexpr const char* kKeywordsLabel = "Keywords:";
constexpr std::size_t kSummarySentences = 3;
constexpr std::size_t kKeywordCount = 8;

std::uint64_t fnv1a(const std::string& data, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t v) {
  static const char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

struct Endpoint {
  std::string base;  // scheme://host:port for the http client
  std::string path_prefix;
};

Endpoint parse_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw GenerationError("endpoint URL missing scheme: " + url, false);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

detail::ordered_json representation_to_json(const TextualRepresentation& rep) {
  detail::ordered_json row;
  row["subject_id"] = rep.subject_id;
  row["kind"] = to_string(rep.kind);
  row["text"] = rep.text;
  row["source"] = rep.source;
  row["model"] = rep.model_name;
  row["created_at"] = rep.created_at;
  row["conforming"] = rep.conforming;
  return row;
}

TextualRepresentation representation_from_json(const detail::ordered_json& row) {
  TextualRepresentation rep;
  rep.subject_id = row.at("subject_id").get<std::string>();
  rep.kind = subject_kind_from_string(row.at("kind").get<std::string>());
  rep.text = row.at("text").get<std::string>();
  rep.source = row.value("source", "remote-llm");
  rep.model_name = row.value("model", "");
  rep.created_at = row.value("created_at", std::int64_t{0});
  rep.conforming = row.value("conforming", is_conforming(rep.text));
  return rep;
}

// Cache writes are serialized; readers tolerate missing files.
std::mutex g_cache_mutex;

bool cache_load(const std::filesystem::path& dir, const std::string& key,
                TextualRepresentation& rep) {
  if (dir.empty()) return false;
  const auto path = dir / (key + ".json");
  std::lock_guard lock(g_cache_mutex);
  if (!std::filesystem::exists(path)) return false;
  auto in = detail::open_input(path);
  detail::ordered_json doc;
  in >> doc;
  rep = representation_from_json(doc);
  return true;
}

void cache_store(const std::filesystem::path& dir, const std::string& key,
                 const TextualRepresentation& rep) {
  if (dir.empty()) return;
  std::lock_guard lock(g_cache_mutex);
  std::filesystem::create_directories(dir);
  auto out = detail::open_output(dir / (key + ".json"));
  out << representation_to_json(rep).dump(2) << "\n";
}

// One POST to {endpoint}/chat/completions; throws GenerationError.
std::string request_completion(const std::string& rendered,
                               const GenerationConfig& config) {
  const Endpoint endpoint = parse_endpoint(config.endpoint);
  httplib::Client client(endpoint.base);
  client.set_connection_timeout(config.timeout_seconds, 0);
  client.set_read_timeout(config.timeout_seconds, 0);

  httplib::Headers headers;
  if (const char* key = std::getenv("FEWSHOT_REC_API_KEY")) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  detail::ordered_json body;
  body["model"] = config.model_name;
  body["temperature"] = config.temperature;
  body["messages"] = detail::ordered_json::array(
      {{{"role", "user"}, {"content", rendered}}});

  std::string last_error;
  for (std::size_t attempt = 1; attempt <= config.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(std::chrono::milliseconds(
          config.backoff_initial_ms << (attempt - 2)));
    }
    auto res = client.Post(endpoint.path_prefix + "/chat/completions", headers,
                           body.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw GenerationError("HTTP " + std::to_string(res->status) + ": " + res->body,
                            false);
    }
    detail::ordered_json doc;
    try {
      doc = detail::ordered_json::parse(res->body);
    } catch (const std::exception& e) {
      throw GenerationError(std::string("unparseable response: ") + e.what(), false);
    }
    if (!doc.contains("choices") || doc["choices"].empty() ||
        !doc["choices"][0].contains("message") ||
        !doc["choices"][0]["message"].contains("content")) {
      throw GenerationError("response missing choices[0].message.content", false);
    }
    const std::string content =
        doc["choices"][0]["message"]["content"].get<std::string>();
    if (content.empty()) {
      throw GenerationError("response content is empty", false);
    }
    return content;
  }
  throw GenerationError("request failed after " + std::to_string(config.max_attempts) +
                            " attempts: " + last_error,
                        true);
}

}  // namespace

std::map<std::string, std::string> parse_labeled_fields(const std::string& text) {
  std::map<std::string, std::string> fields;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    const std::string_view line(text.data() + pos, eol - pos);
    const std::size_t colon = line.find(':');
    if (colon != std::string_view::npos && colon > 0) {
      std::string label(line.substr(0, colon));
      std::string value(line.substr(colon + 1));
      const auto strip = [](std::string& s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
      };
      strip(label);
      strip(value);
      if (!fields.count(label)) fields[label] = value;
    }
    if (eol >= text.size()) break;
    pos = eol + 1;
  }
  return fields;
}

bool is_conforming(const std::string& text) {
  const auto fields = parse_labeled_fields(text);
  return fields.count("Summary") && fields.count("Keywords");
}

std::string cache_key(const std::string& rendered, const std::string& model_name) {
  const std::string payload = rendered + "\x1f" + model_name;
  // Two independent 64-bit streams; plenty for non-adversarial cache keying.
  return to_hex(fnv1a(payload, 14695981039346656037ULL)) +
         to_hex(fnv1a(payload, 0x5173BF5E2AC1D3F7ULL));
}

TextualRepresentation generate(const prompt::PromptSpec& spec,
                               const GenerationConfig& config) {
  const std::string rendered = spec.render();
  const std::string key = cache_key(rendered, config.model_name);
  TextualRepresentation rep;
  if (cache_load(config.cache_dir, key, rep)) return rep;

  std::string content = request_completion(rendered, config);
  if (config.strict && !is_conforming(content)) {
    // One reformat retry with the suffix (and its format indicator)
    // restated; nonconforming output after that is kept, flagged.
    prompt::PromptSpec retry = spec;
    retry.suffix_text += "\n" + spec.suffix_text;
    content = request_completion(retry.render(), config);
  }

  rep.subject_id = spec.subject_id;
  rep.kind = spec.kind;
  rep.text = content;
  rep.source = "remote-llm";
  rep.model_name = config.model_name;
  rep.created_at = std::chrono::duration_cast<std::chrono::seconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  rep.conforming = is_conforming(content);
  cache_store(config.cache_dir, key, rep);
  return rep;
}

TextualRepresentation offline_summarize(const prompt::PromptSpec& spec) {
  // Term frequencies over every review of the subject.
  std::unordered_map<std::string, std::size_t> freq;
  std::vector<std::string> order;  // first-occurrence order for stable ties
  for (const std::string& review : spec.reviews) {
    for (const Token& token : tokenize(review)) {
      std::string norm = normalize_token(token.view(review));
      auto [it, inserted] = freq.try_emplace(norm, 0);
      if (inserted) order.push_back(norm);
      ++it->second;
    }
  }

  // Sentences scored by summed term frequency; stable on ties by position.
  struct Scored {
    std::string text;
    std::size_t score = 0;
    std::size_t position = 0;
  };
  std::vector<Scored> sentences;
  for (const std::string& review : spec.reviews) {
    for (std::string& sentence : split_sentences(review)) {
      Scored s;
      s.score = 0;
      for (const Token& token : tokenize(sentence)) {
        auto it = freq.find(normalize_token(token.view(sentence)));
        if (it != freq.end()) s.score += it->second;
      }
      s.position = sentences.size();
      s.text = std::move(sentence);
      sentences.push_back(std::move(s));
    }
  }
  std::vector<std::size_t> by_score(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) by_score[i] = i;
  std::sort(by_score.begin(), by_score.end(), [&](std::size_t a, std::size_t b) {
    if (sentences[a].score != sentences[b].score)
      return sentences[a].score > sentences[b].score;
    return sentences[a].position < sentences[b].position;
  });
  by_score.resize(std::min(kSummarySentences, by_score.size()));
  std::sort(by_score.begin(), by_score.end());  // emit in original order

  std::string summary;
  for (std::size_t idx : by_score) {
    if (!summary.empty()) summary += " ";
    summary += sentences[idx].text;
  }

  std::vector<std::string> keywords = order;
  std::stable_sort(keywords.begin(), keywords.end(),
                   [&](const std::string& a, const std::string& b) {
                     return freq[a] > freq[b];
                   });
  keywords.resize(std::min(kKeywordCount, keywords.size()));

  std::string text = std::string(kSummaryLabel) + " " + summary + "\n" +
                     kKeywordsLabel + " ";
  for (std::size_t i = 0; i < keywords.size(); ++i) {
    if (i > 0) text += ", ";
    text += keywords[i];
  }

  TextualRepresentation rep;
  rep.subject_id = spec.subject_id;
  rep.kind = spec.kind;
  rep.text = std::move(text);
  rep.source = "offline-oracle";
  rep.model_name = "offline-extractive";
  rep.created_at = 0;
  rep.conforming = is_conforming(rep.text);
  return rep;
}

Backend parse_backend(const std::string& name) {
  if (name == "remote") return Backend::kRemote;
  if (name == "offline") return Backend::kOffline;
  throw std::invalid_argument("unknown backend: " + name);
}

GenerateAllResult generate_all(const std::vector<prompt::PromptSpec>& prompts,
                               const GenerationConfig& config, Backend backend) {
  GenerateAllResult result;
  const std::size_t n = prompts.size();
  std::vector<TextualRepresentation> slots(n);
  std::vector<std::string> errors(n);
  std::vector<char> ok(n, 0);
  std::vector<char> from_cache(n, 0);

  const auto process = [&](std::size_t i) {
    const prompt::PromptSpec& spec = prompts[i];
    try {
      if (backend == Backend::kOffline) {
        slots[i] = offline_summarize(spec);
      } else {
        const std::string key = cache_key(spec.render(), config.model_name);
        TextualRepresentation cached;
        if (cache_load(config.cache_dir, key, cached)) {
          slots[i] = std::move(cached);
          from_cache[i] = 1;
        } else {
          slots[i] = generate(spec, config);
        }
      }
      ok[i] = 1;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };

  if (backend == Backend::kRemote && config.max_in_flight > 1 && n > 1) {
    ThreadPool pool(config.max_in_flight);
    for (std::size_t i = 0; i < n; ++i) {
      pool.submit([&, i] { process(i); });
    }
    pool.wait_idle();
  } else {
    for (std::size_t i = 0; i < n; ++i) process(i);
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (ok[i]) {
      result.representations.push_back(std::move(slots[i]));
      if (from_cache[i]) ++result.cache_hits;
      else ++result.backend_calls;
    } else {
      result.deferred.push_back({prompts[i].subject_id, prompts[i].kind, errors[i]});
    }
  }
  return result;
}

void save_representations(const std::vector<TextualRepresentation>& reps,
                          const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (const TextualRepresentation& rep : reps) {
    out << representation_to_json(rep).dump() << "\n";
  }
}

std::vector<TextualRepresentation> load_representations(
    const std::filesystem::path& path) {
  std::vector<TextualRepresentation> reps;
  detail::for_each_jsonl(path, [&](const detail::ordered_json& row) {
    reps.push_back(representation_from_json(row));
  });
  return reps;
}

}  // namespace fsrec::repgen
