#include "fsrec/embed.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "fsrec/text.hpp"
#include "httplib.h"
#include "jsonl_util.hpp"

namespace fsrec::embed {
namespace {

using detail::ordered_json;

std::uint64_t fnv1a64(std::string_view data, std::uint64_t h) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void check_finite(const std::vector<double>& values, const std::string& subject_id) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("non-finite embedding value for subject '" +
                                  subject_id + "'");
    }
  }
}

// endpoint -> (scheme://host[:port], path prefix)
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = endpoint.find('/', host_start);
  if (path_start == std::string::npos) return {endpoint, ""};
  std::string prefix = endpoint.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {endpoint.substr(0, path_start), prefix};
}

}  // namespace

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::kRepBert: return "rep+bert";
    case Variant::kRawBert: return "raw+bert";
    case Variant::kRepW2v: return "rep+w2v";
    case Variant::kRawW2v: return "raw+w2v";
  }
  throw std::logic_error("unreachable variant");
}

Variant variant_from_string(const std::string& name) {
  if (name == "rep+bert") return Variant::kRepBert;
  if (name == "raw+bert") return Variant::kRawBert;
  if (name == "rep+w2v") return Variant::kRepW2v;
  if (name == "raw+w2v") return Variant::kRawW2v;
  throw std::invalid_argument("unknown embedding variant '" + name + "'");
}

std::size_t dimension_of(Variant variant) {
  switch (variant) {
    case Variant::kRepBert:
    case Variant::kRawBert: return 1024;
    case Variant::kRepW2v:
    case Variant::kRawW2v: return 200;
  }
  throw std::logic_error("unreachable variant");
}

bool uses_representations(Variant variant) {
  return variant == Variant::kRepBert || variant == Variant::kRepW2v;
}

void EmbeddingSet::insert(const std::string& subject_id, std::vector<double> values) {
  if (values.size() != dimension_) {
    throw std::invalid_argument(
        "embedding for '" + subject_id + "' has dimension " +
        std::to_string(values.size()) + ", set expects " + std::to_string(dimension_));
  }
  check_finite(values, subject_id);
  vectors_[subject_id] = std::move(values);
}

const std::vector<double>* EmbeddingSet::find(const std::string& subject_id) const {
  auto it = vectors_.find(subject_id);
  return it == vectors_.end() ? nullptr : &it->second;
}

double l2_norm(const std::vector<double>& values) {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

std::vector<std::vector<double>> Embedder::embed_batch(
    const std::vector<std::string>& texts, std::size_t dimension) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& text : texts) out.push_back(embed(text, dimension));
  return out;
}

std::vector<double> HashEmbedder::embed(const std::string& text, std::size_t dimension) {
  if (dimension == 0) throw std::invalid_argument("embedding dimension must be positive");
  std::vector<double> values(dimension, 0.0);
  auto tokens = fsrec::tokenize(text);
  for (const auto& token : tokens) {
    std::string norm = fsrec::normalize_token(std::string(token.view(text)));
    std::uint64_t h = fnv1a64(norm, 14695981039346656037ULL ^ seed_);
    double sign = (h >> 63) ? -1.0 : 1.0;
    values[h % dimension] += sign;
  }
  double norm = l2_norm(values);
  if (norm < 1e-12) {
    // Guard: empty or fully cancelled text still gets a deterministic
    // unit vector keyed on the whole string.
    values.assign(dimension, 0.0);
    values[fnv1a64(text, 14695981039346656037ULL ^ seed_) % dimension] = 1.0;
    return values;
  }
  for (double& v : values) v /= norm;
  return values;
}

std::vector<double> RemoteEmbedder::embed(const std::string& text, std::size_t dimension) {
  return embed_batch({text}, dimension).front();
}

std::vector<std::vector<double>> RemoteEmbedder::embed_batch(
    const std::vector<std::string>& texts, std::size_t dimension) {
  if (texts.empty()) return {};
  // Requests carry at most batch_size inputs each.
  if (config_.batch_size > 0 && texts.size() > config_.batch_size) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += config_.batch_size) {
      std::size_t end = std::min(texts.size(), start + config_.batch_size);
      std::vector<std::string> window(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                      texts.begin() + static_cast<std::ptrdiff_t>(end));
      auto part = embed_batch(window, dimension);
      out.insert(out.end(), std::make_move_iterator(part.begin()),
                 std::make_move_iterator(part.end()));
    }
    return out;
  }
  auto [base, prefix] = split_endpoint(config_.endpoint);
  httplib::Client client(base);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers;
  if (const char* key = std::getenv("FEWSHOT_REC_API_KEY"); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  ordered_json body;
  body["model"] = config_.model_name;
  body["input"] = texts;
  const std::string payload = body.dump();

  int backoff_ms = config_.backoff_initial_ms;
  std::string last_error = "no attempt made";
  for (std::size_t attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms *= 2;
    }
    auto res = client.Post(prefix + "/embeddings", headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "retriable status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw std::runtime_error("embedding service returned status " +
                               std::to_string(res->status));
    }
    ordered_json parsed;
    try {
      parsed = ordered_json::parse(res->body);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("embedding response is not JSON: ") + e.what());
    }
    if (!parsed.contains("data") || !parsed["data"].is_array() ||
        parsed["data"].size() != texts.size()) {
      throw std::runtime_error("embedding response data array is missing or mis-sized");
    }
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& row : parsed["data"]) {
      if (!row.contains("embedding") || !row["embedding"].is_array()) {
        throw std::runtime_error("embedding response row lacks an embedding array");
      }
      std::vector<double> values = row["embedding"].get<std::vector<double>>();
      if (values.size() != dimension) {
        // Wrong service or wrong variant wiring; retrying cannot help.
        throw std::runtime_error(
            "embedding service returned dimension " + std::to_string(values.size()) +
            " but the variant requires " + std::to_string(dimension) +
            "; check endpoint and model configuration");
      }
      out.push_back(std::move(values));
    }
    return out;
  }
  throw std::runtime_error("embedding request failed after " +
                           std::to_string(config_.max_attempts) +
                           " attempts; last error: " + last_error);
}

MergePolicy merge_policy_from_string(const std::string& name) {
  if (name == "mean") return MergePolicy::kMean;
  if (name == "sum") return MergePolicy::kSum;
  if (name == "max") return MergePolicy::kMax;
  throw std::invalid_argument("unknown merge policy '" + name + "'");
}

namespace {

void normalize_in_place(std::vector<double>& values) {
  double norm = l2_norm(values);
  if (norm < 1e-12) return;  // leave degenerate vectors untouched
  for (double& v : values) v /= norm;
}

bool should_normalize(const Embedder& embedder, const EmbedOptions& options) {
  if (options.normalize_override.has_value()) return *options.normalize_override;
  return embedder.self_normalizing();
}

// Splits concatenated text at token boundaries so no chunk exceeds
// chunk_limit counting units.
std::vector<std::string> chunk_text(const std::string& text, std::size_t chunk_limit) {
  auto tokens = fsrec::tokenize(text);
  std::vector<std::string> chunks;
  std::size_t begin_token = 0;
  while (begin_token < tokens.size()) {
    std::size_t end_token = begin_token;
    std::size_t units = 0;
    while (end_token < tokens.size() && units < chunk_limit) {
      ++units;
      ++end_token;
    }
    std::size_t byte_begin = tokens[begin_token].begin;
    std::size_t byte_end = tokens[end_token - 1].end;
    chunks.push_back(text.substr(byte_begin, byte_end - byte_begin));
    begin_token = end_token;
  }
  return chunks;
}

}  // namespace

std::vector<double> embed_text(const std::string& text, Embedder& embedder,
                               std::size_t dimension, const EmbedOptions& options) {
  std::vector<double> values = embedder.embed(text, dimension);
  if (values.size() != dimension) {
    throw std::runtime_error("embedder produced dimension " +
                             std::to_string(values.size()) + ", expected " +
                             std::to_string(dimension));
  }
  if (should_normalize(embedder, options) && !embedder.self_normalizing()) {
    normalize_in_place(values);
  }
  return values;
}

std::vector<double> embed_control(const std::vector<std::string>& reviews,
                                  Embedder& embedder, std::size_t dimension,
                                  const EmbedOptions& options) {
  if (reviews.empty()) {
    throw std::invalid_argument("embed_control requires at least one review");
  }
  if (options.chunk_limit == 0) {
    throw std::invalid_argument("chunk_limit must be positive");
  }
  std::string joined;
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    if (i > 0) joined += "\n";
    joined += reviews[i];
  }
  auto chunks = chunk_text(joined, options.chunk_limit);
  if (chunks.empty()) chunks.push_back(joined);  // whitespace-only text
  if (chunks.size() == 1) {
    // Single chunk passes straight through so the control path agrees
    // with plain text embedding.
    return embed_text(chunks.front(), embedder, dimension, options);
  }
  auto parts = embedder.embed_batch(chunks, dimension);
  std::vector<double> merged(dimension, 0.0);
  for (const auto& part : parts) {
    if (part.size() != dimension) {
      throw std::runtime_error("chunk embedding has wrong dimension");
    }
    for (std::size_t i = 0; i < dimension; ++i) {
      switch (options.merge) {
        case MergePolicy::kMean:
        case MergePolicy::kSum: merged[i] += part[i]; break;
        case MergePolicy::kMax: merged[i] = std::max(merged[i], part[i]); break;
      }
    }
  }
  if (options.merge == MergePolicy::kMean) {
    for (double& v : merged) v /= static_cast<double>(parts.size());
  }
  if (options.normalize_override.value_or(true)) normalize_in_place(merged);
  return merged;
}

VariantResult build_variant(const corpus::SplitBundle& splits,
                            const std::vector<repgen::TextualRepresentation>& reps,
                            Embedder& embedder, Variant variant,
                            const EmbedOptions& options) {
  const std::size_t dim = dimension_of(variant);
  std::string provenance = embedder.id() + ";merge=" +
      (options.merge == MergePolicy::kMean ? "mean"
       : options.merge == MergePolicy::kSum ? "sum" : "max") +
      ";chunk=" + std::to_string(options.chunk_limit);
  VariantResult result{
      EmbeddingSet(variant, SubjectKind::kUser, dim, provenance),
      EmbeddingSet(variant, SubjectKind::kItem, dim, provenance),
      {}};

  std::map<std::pair<SubjectKind, std::string>, const repgen::TextualRepresentation*> rep_index;
  for (const auto& rep : reps) rep_index[{rep.kind, rep.subject_id}] = &rep;

  auto run_subject = [&](SubjectKind kind, const std::string& subject_id,
                         const std::vector<std::string>& reviews) {
    EmbeddingSet& target = kind == SubjectKind::kUser ? result.users : result.items;
    try {
      if (uses_representations(variant)) {
        auto it = rep_index.find({kind, subject_id});
        if (it == rep_index.end() || it->second->text.empty()) {
          throw std::runtime_error("no representation text");
        }
        target.insert(subject_id, embed_text(it->second->text, embedder, dim, options));
      } else {
        target.insert(subject_id, embed_control(reviews, embedder, dim, options));
      }
    } catch (const std::exception& e) {
      result.missing_subjects.push_back(to_string(kind) + ":" + subject_id +
                                        " (" + e.what() + ")");
    }
  };

  for (const auto& [user_id, train] : splits.user_train) {
    std::vector<std::string> reviews;
    reviews.reserve(train.size());
    for (const auto& inter : train) reviews.push_back(inter.review);
    run_subject(SubjectKind::kUser, user_id, reviews);
  }
  for (const auto& [item_id, train] : splits.item_train) {
    std::vector<std::string> reviews;
    reviews.reserve(train.size());
    for (const auto& inter : train) reviews.push_back(inter.review);
    run_subject(SubjectKind::kItem, item_id, reviews);
  }
  return result;
}

namespace {

void save_set(const EmbeddingSet& set, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (const auto& [subject_id, values] : set.vectors()) {
    ordered_json row;
    row["subject_id"] = subject_id;
    row["kind"] = fsrec::to_string(set.kind());
    row["variant"] = to_string(set.variant());
    row["values"] = values;
    out << row.dump() << "\n";
  }
}

}  // namespace

void save_variant(const VariantResult& result, const std::filesystem::path& dir) {
  auto variant_dir = dir / to_string(result.users.variant());
  save_set(result.users, variant_dir / "users.jsonl");
  save_set(result.items, variant_dir / "items.jsonl");
}

EmbeddingSet load_embedding_set(const std::filesystem::path& path) {
  EmbeddingSet set;
  bool first = true;
  detail::for_each_jsonl(path, [&](const ordered_json& row) {
    auto subject_id = row.at("subject_id").get<std::string>();
    auto kind = subject_kind_from_string(row.at("kind").get<std::string>());
    auto variant = variant_from_string(row.at("variant").get<std::string>());
    auto values = row.at("values").get<std::vector<double>>();
    if (first) {
      set = EmbeddingSet(variant, kind, values.size());
      first = false;
    } else if (variant != set.variant() || kind != set.kind()) {
      throw std::runtime_error("mixed variants or kinds in " + path.string());
    }
    set.insert(subject_id, std::move(values));
  });
  return set;
}

std::pair<EmbeddingSet, EmbeddingSet> load_variant(const std::filesystem::path& variant_dir) {
  return {load_embedding_set(variant_dir / "users.jsonl"),
          load_embedding_set(variant_dir / "items.jsonl")};
}

}  // namespace fsrec::embed
