#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fsrec/corpus.hpp"
#include "fsrec/repgen.hpp"

namespace fsrec::embed {

// Dataset variants: {LLM representation | raw review concatenation} x
// {1024-d BERT-like | 200-d word-vector-like}.
enum class Variant { kRepBert, kRawBert, kRepW2v, kRawW2v };

std::string to_string(Variant variant);
Variant variant_from_string(const std::string& name);
std::size_t dimension_of(Variant variant);  // 1024 for *+bert, 200 for *+w2v
bool uses_representations(Variant variant);

struct EmbeddingVector {
  std::string subject_id;
  SubjectKind kind = SubjectKind::kUser;
  Variant variant = Variant::kRepBert;
  std::vector<double> values;
};

// Uniform-dimension map of subject vectors for one variant and kind.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  EmbeddingSet(Variant variant, SubjectKind kind, std::size_t dimension,
               std::string provenance = "")
      : variant_(variant), kind_(kind), dimension_(dimension),
        provenance_(std::move(provenance)) {}

  // Throws when the vector length disagrees with the set dimension or any
  // entry is non-finite.
  void insert(const std::string& subject_id, std::vector<double> values);

  const std::vector<double>* find(const std::string& subject_id) const;
  const std::map<std::string, std::vector<double>>& vectors() const {
    return vectors_;
  }
  std::size_t size() const { return vectors_.size(); }
  std::size_t dimension() const { return dimension_; }
  Variant variant() const { return variant_; }
  SubjectKind kind() const { return kind_; }
  const std::string& provenance() const { return provenance_; }

 private:
  Variant variant_ = Variant::kRepBert;
  SubjectKind kind_ = SubjectKind::kUser;
  std::size_t dimension_ = 0;
  std::string provenance_;
  std::map<std::string, std::vector<double>> vectors_;
};

// Fixed, published seed so hash-embedded fixtures are portable.
inline constexpr std::uint64_t kHashEmbedSeed = 0x5EEDF00DCAFEBEEFULL;

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(const std::string& text, std::size_t dimension) = 0;
  virtual std::vector<std::vector<double>> embed_batch(
      const std::vector<std::string>& texts, std::size_t dimension);
  virtual std::string id() const = 0;
  // True when vectors come out unit-norm by construction.
  virtual bool self_normalizing() const = 0;
};

// Seeded-hash bag-of-words projection: each token lands on (hash mod d)
// with a hash-derived sign, accumulated and L2-normalized. Deterministic,
// dimension-exact, no model weights.
class HashEmbedder : public Embedder {
 public:
  explicit HashEmbedder(std::uint64_t seed = kHashEmbedSeed) : seed_(seed) {}
  std::vector<double> embed(const std::string& text, std::size_t dimension) override;
  std::string id() const override { return "hash-fallback"; }
  bool self_normalizing() const override { return true; }

 private:
  std::uint64_t seed_;
};

struct EmbedServiceConfig {
  std::string endpoint = "http://127.0.0.1:8725";
  std::string model_name = "embedding-model";
  std::size_t max_attempts = 3;
  int backoff_initial_ms = 250;
  int timeout_seconds = 60;
  std::size_t batch_size = 16;
};

// POST {endpoint}/embeddings with {"model", "input": [...]}; vectors read
// from data[i].embedding. Raw service geometry is preserved (no
// renormalization). Dimension mismatches are fatal config errors.
class RemoteEmbedder : public Embedder {
 public:
  explicit RemoteEmbedder(EmbedServiceConfig config) : config_(std::move(config)) {}
  std::vector<double> embed(const std::string& text, std::size_t dimension) override;
  std::vector<std::vector<double>> embed_batch(
      const std::vector<std::string>& texts, std::size_t dimension) override;
  std::string id() const override { return "remote:" + config_.model_name; }
  bool self_normalizing() const override { return false; }

 private:
  EmbedServiceConfig config_;
};

enum class MergePolicy { kMean, kSum, kMax };
MergePolicy merge_policy_from_string(const std::string& name);

struct EmbedOptions {
  std::size_t chunk_limit = 500;  // units per chunk, prompt counting rule
  MergePolicy merge = MergePolicy::kMean;
  // Unset: normalize fallback and merged vectors only. Set: force on/off.
  std::optional<bool> normalize_override;
};

// Single text to length-d vector. Fallback vectors are L2-normalized,
// remote vectors are not (unless overridden).
std::vector<double> embed_text(const std::string& text, Embedder& embedder,
                               std::size_t dimension,
                               const EmbedOptions& options = {});

// Control-dataset path: concatenate the subject's reviews, embed in chunks
// of at most chunk_limit units, then merge (mean by default) and normalize.
// A single chunk passes through embed_text unchanged.
std::vector<double> embed_control(const std::vector<std::string>& reviews,
                                  Embedder& embedder, std::size_t dimension,
                                  const EmbedOptions& options = {});

struct VariantResult {
  EmbeddingSet users;
  EmbeddingSet items;
  std::vector<std::string> missing_subjects;  // "kind:id", skipped not fatal
};

// Builds the paired user/item sets for one variant: rep+* variants embed
// representation texts, raw+* variants run embed_control over the subject's
// training reviews.
VariantResult build_variant(const corpus::SplitBundle& splits,
                            const std::vector<repgen::TextualRepresentation>& reps,
                            Embedder& embedder, Variant variant,
                            const EmbedOptions& options = {});

// On-disk layout: <dir>/<variant>/users.jsonl and items.jsonl, one row per
// subject {subject_id, kind, variant, values}.
void save_variant(const VariantResult& result, const std::filesystem::path& dir);
EmbeddingSet load_embedding_set(const std::filesystem::path& path);
// Loads <variant_dir>/users.jsonl + items.jsonl.
std::pair<EmbeddingSet, EmbeddingSet> load_variant(const std::filesystem::path& variant_dir);

double l2_norm(const std::vector<double>& values);

}  // namespace fsrec::embed
