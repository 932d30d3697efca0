#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace fsrec {

// One explicit-feedback sample: a user reviewed an item at some time,
// optionally with a 1-5 star rating. Review text is UTF-8 and may contain
// emoji, memes, or anything else users type; it is never normalized.
struct Interaction {
  std::string user_id;
  std::string item_id;
  std::string review;  // may be empty, never absent
  std::optional<int> rating;  // 1..5 when present
  std::int64_t timestamp = 0;  // seconds since epoch, >= 0
};

// Immutable-after-ingest collection of interactions with per-user and
// per-item indexes. Chronological order means (timestamp, item_id) for a
// user's history and (timestamp, user_id) for an item's history; the
// secondary key makes equal-timestamp ordering reproducible.
class InteractionStore {
 public:
  // Returns false (and stores nothing) when the (user, item, timestamp)
  // triple is already present.
  bool add(Interaction interaction);

  const std::vector<Interaction>& all() const { return interactions_; }
  std::size_t size() const { return interactions_.size(); }

  std::size_t user_count() const { return by_user_.size(); }
  std::size_t item_count() const { return by_item_.size(); }

  // Distinct ids in lexicographic order.
  std::vector<std::string> user_ids() const;
  std::vector<std::string> item_ids() const;

  bool has_user(const std::string& user_id) const {
    return by_user_.count(user_id) > 0;
  }

  // Chronologically ordered history; empty vector for unknown ids.
  std::vector<const Interaction*> user_history(const std::string& user_id) const;
  std::vector<const Interaction*> item_history(const std::string& item_id) const;

 private:
  std::vector<Interaction> interactions_;
  std::map<std::string, std::vector<std::size_t>> by_user_;
  std::map<std::string, std::vector<std::size_t>> by_item_;
  std::unordered_set<std::string> seen_triples_;
};

}  // namespace fsrec
