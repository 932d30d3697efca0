#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fsrec/interaction.hpp"

namespace fsrec::corpus {

enum class IngestFormat { kCsv, kJsonl };

IngestFormat parse_ingest_format(const std::string& name);

struct IngestResult {
  InteractionStore store;
  std::size_t malformed_rows = 0;
  std::size_t duplicate_rows = 0;
};

// Loads a Douban-like interaction log. CSV needs the header
// user_id,item_id,rating,timestamp,review (any column order); JSONL rows use
// the same keys. Malformed rows and duplicate (user, item, timestamp)
// triples are skipped and counted, with one warning each on stderr.
IngestResult ingest(const std::filesystem::path& path, IngestFormat format);

// Binary store snapshot, bit-stable across runs.
void save_store(const InteractionStore& store, const std::filesystem::path& path);
InteractionStore load_store(const std::filesystem::path& path);

struct HeldOutEntry {
  std::string item_id;
  std::int64_t timestamp = 0;
};

// Train/validation/test partition. Maps are ordered so serialization is
// reproducible byte for byte.
struct SplitBundle {
  std::map<std::string, std::vector<Interaction>> user_train;
  std::map<std::string, HeldOutEntry> validation;
  std::map<std::string, HeldOutEntry> test;
  std::map<std::string, std::vector<Interaction>> item_train;
  std::vector<std::string> dropped_users;  // cohort users with < 3 interactions
  std::size_t fallback_items = 0;  // items covered only by a cohort sample

  std::vector<std::string> cohort_users() const;
  // item ids referenced by user_train, validation, or test, sorted.
  std::vector<std::string> referenced_items() const;
};

// Uniform sample of n distinct user ids, sorted; identical for a fixed seed.
std::vector<std::string> select_cohort(const InteractionStore& store,
                                       std::size_t n, std::uint64_t seed);

// Per cohort user: most recent interaction becomes the test entry, second
// most recent the validation entry, the rest the training list. Ties on
// timestamp break by item_id. Users with fewer than 3 interactions are
// dropped with a warning. `newest_to_test=false` swaps the two held-out
// roles (config flag split.order).
SplitBundle leave_two_out(const InteractionStore& store,
                          const std::vector<std::string>& cohort,
                          bool newest_to_test = true);

// Caps every user's training list at `cap` samples, uniformly chosen,
// chronological order preserved. Every user keeps at least one sample.
std::map<std::string, std::vector<Interaction>> fewshot_downsample(
    const std::map<std::string, std::vector<Interaction>>& user_train,
    std::size_t cap, std::uint64_t seed);

struct ItemTrainResult {
  std::map<std::string, std::vector<Interaction>> item_train;
  std::size_t fallback_items = 0;
};

// Groups non-cohort interactions by item, capped at `per_item_cap` per item
// (uniform subsample, chronological order kept). Items referenced by the
// splits that have no non-cohort sample get one cohort sample as fallback,
// preferring a sample from some user's training list.
ItemTrainResult build_item_train(const InteractionStore& store,
                                 const std::vector<std::string>& cohort,
                                 const SplitBundle& splits,
                                 std::size_t per_item_cap, std::uint64_t seed);

// Writes user_train.jsonl, valid.jsonl, test.jsonl, item_train.jsonl.
void save_splits(const SplitBundle& splits, const std::filesystem::path& dir);
SplitBundle load_splits(const std::filesystem::path& dir);

// Checks chronology, coverage, few-shot floor, and the per-item cap.
// `newest_to_test` must match the order the splits were built with; it
// decides which held-out role is expected to be the newer one.
// Returns human-readable violations; empty means all invariants hold.
std::vector<std::string> check_split_invariants(const InteractionStore& store,
                                                const SplitBundle& splits,
                                                std::size_t cap,
                                                std::size_t per_item_cap,
                                                bool newest_to_test = true);

}  // namespace fsrec::corpus
