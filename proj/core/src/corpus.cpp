#include "fsrec/corpus.hpp"

#include <algorithm>
#include <cstring>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "fsrec/rng.hpp"
#include "jsonl_util.hpp"

namespace fsrec {

bool InteractionStore::add(Interaction interaction) {
  std::string key = interaction.user_id;
  key.push_back('\x1f');
  key += interaction.item_id;
  key.push_back('\x1f');
  key += std::to_string(interaction.timestamp);
  if (!seen_triples_.insert(std::move(key)).second) return false;
  const std::size_t idx = interactions_.size();
  by_user_[interaction.user_id].push_back(idx);
  by_item_[interaction.item_id].push_back(idx);
  interactions_.push_back(std::move(interaction));
  return true;
}

std::vector<std::string> InteractionStore::user_ids() const {
  std::vector<std::string> ids;
  ids.reserve(by_user_.size());
  for (const auto& [id, _] : by_user_) ids.push_back(id);
  return ids;
}

std::vector<std::string> InteractionStore::item_ids() const {
  std::vector<std::string> ids;
  ids.reserve(by_item_.size());
  for (const auto& [id, _] : by_item_) ids.push_back(id);
  return ids;
}

std::vector<const Interaction*> InteractionStore::user_history(
    const std::string& user_id) const {
  std::vector<const Interaction*> out;
  auto it = by_user_.find(user_id);
  if (it == by_user_.end()) return out;
  out.reserve(it->second.size());
  for (std::size_t idx : it->second) out.push_back(&interactions_[idx]);
  std::sort(out.begin(), out.end(), [](const Interaction* a, const Interaction* b) {
    return std::tie(a->timestamp, a->item_id) < std::tie(b->timestamp, b->item_id);
  });
  return out;
}

std::vector<const Interaction*> InteractionStore::item_history(
    const std::string& item_id) const {
  std::vector<const Interaction*> out;
  auto it = by_item_.find(item_id);
  if (it == by_item_.end()) return out;
  out.reserve(it->second.size());
  for (std::size_t idx : it->second) out.push_back(&interactions_[idx]);
  std::sort(out.begin(), out.end(), [](const Interaction* a, const Interaction* b) {
    return std::tie(a->timestamp, a->user_id) < std::tie(b->timestamp, b->user_id);
  });
  return out;
}

}  // namespace fsrec

namespace fsrec::corpus {

namespace {

void warn(const std::string& message) { std::cerr << "[warn] " << message << "\n"; }

// Portable string hash for per-item seed derivation; std::hash is
// implementation-defined and would break cross-platform reproducibility.
std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// RFC-4180-style CSV: quoted fields may contain commas, doubled quotes,
// and newlines. Returns one record per call; false at end of input.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool saw_any = false;
  int c;
  while ((c = in.get()) != EOF) {
    saw_any = true;
    const char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\r') {
      // swallow; \r\n handled by the \n branch
    } else if (ch == '\n') {
      fields.push_back(std::move(field));
      return true;
    } else {
      field.push_back(ch);
    }
  }
  if (!saw_any) return false;
  fields.push_back(std::move(field));
  return true;
}

bool parse_int64(const std::string& text, std::int64_t& out) {
  if (text.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stoll(text, &pos);
  } catch (...) {
    return false;
  }
  return pos == text.size();
}

// Validates and normalizes one candidate row; returns false when malformed.
bool make_interaction(std::string user_id, std::string item_id,
                      const std::string& rating_text, const std::string& ts_text,
                      std::string review, Interaction& out) {
  if (user_id.empty() || item_id.empty()) return false;
  std::int64_t ts = 0;
  if (!parse_int64(ts_text, ts) || ts < 0) return false;
  std::optional<int> rating;
  if (!rating_text.empty()) {
    std::int64_t r = 0;
    if (!parse_int64(rating_text, r) || r < 1 || r > 5) return false;
    rating = static_cast<int>(r);
  }
  out.user_id = std::move(user_id);
  out.item_id = std::move(item_id);
  out.review = std::move(review);
  out.rating = rating;
  out.timestamp = ts;
  return true;
}

IngestResult ingest_csv(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  IngestResult result;
  std::vector<std::string> fields;
  if (!read_csv_record(in, fields)) return result;  // empty file

  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < fields.size(); ++i) col[fields[i]] = i;
  for (const char* name : {"user_id", "item_id", "rating", "timestamp", "review"}) {
    if (!col.count(name)) {
      throw std::runtime_error(path.string() + ": missing CSV column '" +
                               name + "'");
    }
  }
  const std::size_t n_cols = fields.size();

  while (read_csv_record(in, fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    Interaction interaction;
    if (fields.size() != n_cols ||
        !make_interaction(fields[col["user_id"]], fields[col["item_id"]],
                          fields[col["rating"]], fields[col["timestamp"]],
                          fields[col["review"]], interaction)) {
      ++result.malformed_rows;
      warn("skipping malformed CSV row in " + path.string());
      continue;
    }
    if (!result.store.add(std::move(interaction))) {
      ++result.duplicate_rows;
      warn("skipping duplicate (user, item, timestamp) row in " + path.string());
    }
  }
  return result;
}

IngestResult ingest_jsonl(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  IngestResult result;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Interaction interaction;
    bool ok = false;
    try {
      const auto row = detail::ordered_json::parse(line);
      std::string rating_text;
      if (row.contains("rating") && !row["rating"].is_null()) {
        rating_text = std::to_string(row["rating"].get<std::int64_t>());
      }
      ok = make_interaction(row.value("user_id", ""), row.value("item_id", ""),
                            rating_text,
                            row.contains("timestamp")
                                ? std::to_string(row["timestamp"].get<std::int64_t>())
                                : "",
                            row.value("review", ""), interaction);
    } catch (...) {
      ok = false;
    }
    if (!ok) {
      ++result.malformed_rows;
      warn("skipping malformed JSONL row in " + path.string());
      continue;
    }
    if (!result.store.add(std::move(interaction))) {
      ++result.duplicate_rows;
      warn("skipping duplicate (user, item, timestamp) row in " + path.string());
    }
  }
  return result;
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw std::runtime_error("truncated store file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const std::uint64_t len = read_u64(in);
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("truncated store file");
  return s;
}

constexpr char kStoreMagic[8] = {'F', 'S', 'R', 'E', 'C', 'S', 'T', '1'};

detail::ordered_json interaction_to_json(const Interaction& x) {
  detail::ordered_json row;
  row["user_id"] = x.user_id;
  row["item_id"] = x.item_id;
  if (x.rating) {
    row["rating"] = *x.rating;
  } else {
    row["rating"] = nullptr;
  }
  row["timestamp"] = x.timestamp;
  row["review"] = x.review;
  return row;
}

Interaction interaction_from_json(const detail::ordered_json& row) {
  Interaction x;
  x.user_id = row.at("user_id").get<std::string>();
  x.item_id = row.at("item_id").get<std::string>();
  if (row.contains("rating") && !row.at("rating").is_null()) {
    x.rating = row.at("rating").get<int>();
  }
  x.timestamp = row.at("timestamp").get<std::int64_t>();
  x.review = row.value("review", "");
  return x;
}

}  // namespace

IngestFormat parse_ingest_format(const std::string& name) {
  if (name == "csv") return IngestFormat::kCsv;
  if (name == "jsonl") return IngestFormat::kJsonl;
  throw std::invalid_argument("unknown ingest format: " + name);
}

IngestResult ingest(const std::filesystem::path& path, IngestFormat format) {
  return format == IngestFormat::kCsv ? ingest_csv(path) : ingest_jsonl(path);
}

void save_store(const InteractionStore& store, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out.write(kStoreMagic, sizeof(kStoreMagic));
  write_u64(out, store.size());
  for (const Interaction& x : store.all()) {
    write_string(out, x.user_id);
    write_string(out, x.item_id);
    write_u64(out, static_cast<std::uint64_t>(x.rating ? *x.rating : 0));
    write_u64(out, static_cast<std::uint64_t>(x.timestamp));
    write_string(out, x.review);
  }
  if (!out) throw std::runtime_error("failed writing store to " + path.string());
}

InteractionStore load_store(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kStoreMagic, sizeof(magic)) != 0) {
    throw std::runtime_error(path.string() + " is not a store file");
  }
  const std::uint64_t count = read_u64(in);
  InteractionStore store;
  for (std::uint64_t i = 0; i < count; ++i) {
    Interaction x;
    x.user_id = read_string(in);
    x.item_id = read_string(in);
    const std::uint64_t rating = read_u64(in);
    if (rating != 0) x.rating = static_cast<int>(rating);
    x.timestamp = static_cast<std::int64_t>(read_u64(in));
    x.review = read_string(in);
    store.add(std::move(x));
  }
  return store;
}

std::vector<std::string> SplitBundle::cohort_users() const {
  std::vector<std::string> users;
  users.reserve(user_train.size());
  for (const auto& [user_id, _] : user_train) users.push_back(user_id);
  return users;
}

std::vector<std::string> SplitBundle::referenced_items() const {
  std::set<std::string> items;
  for (const auto& [_, train] : user_train) {
    for (const Interaction& x : train) items.insert(x.item_id);
  }
  for (const auto& [_, entry] : validation) items.insert(entry.item_id);
  for (const auto& [_, entry] : test) items.insert(entry.item_id);
  return {items.begin(), items.end()};
}

std::vector<std::string> select_cohort(const InteractionStore& store,
                                       std::size_t n, std::uint64_t seed) {
  const std::vector<std::string> users = store.user_ids();
  if (n > users.size()) {
    throw std::runtime_error("cohort size " + std::to_string(n) +
                             " exceeds distinct user count " +
                             std::to_string(users.size()));
  }
  Rng rng(seed);
  const auto picks = rng.sample_indices(users.size(), n);
  std::vector<std::string> cohort;
  cohort.reserve(n);
  for (std::size_t idx : picks) cohort.push_back(users[idx]);
  std::sort(cohort.begin(), cohort.end());
  return cohort;
}

SplitBundle leave_two_out(const InteractionStore& store,
                          const std::vector<std::string>& cohort,
                          bool newest_to_test) {
  SplitBundle splits;
  for (const std::string& user_id : cohort) {
    const auto history = store.user_history(user_id);
    if (history.size() < 3) {
      splits.dropped_users.push_back(user_id);
      warn("user " + user_id + " has " + std::to_string(history.size()) +
           " interactions (< 3); excluded from cohort");
      continue;
    }
    const Interaction* newest = history[history.size() - 1];
    const Interaction* second = history[history.size() - 2];
    const Interaction* to_test = newest_to_test ? newest : second;
    const Interaction* to_valid = newest_to_test ? second : newest;
    splits.test[user_id] = {to_test->item_id, to_test->timestamp};
    splits.validation[user_id] = {to_valid->item_id, to_valid->timestamp};
    auto& train = splits.user_train[user_id];
    for (std::size_t i = 0; i + 2 < history.size(); ++i) {
      train.push_back(*history[i]);
    }
  }
  return splits;
}

std::map<std::string, std::vector<Interaction>> fewshot_downsample(
    const std::map<std::string, std::vector<Interaction>>& user_train,
    std::size_t cap, std::uint64_t seed) {
  if (cap < 1) throw std::invalid_argument("few-shot cap must be >= 1");
  std::map<std::string, std::vector<Interaction>> out;
  Rng rng(seed);
  for (const auto& [user_id, train] : user_train) {
    if (train.size() <= cap) {
      out[user_id] = train;
      continue;
    }
    auto keep = rng.sample_indices(train.size(), cap);
    std::sort(keep.begin(), keep.end());  // preserve chronological order
    auto& kept = out[user_id];
    kept.reserve(cap);
    for (std::size_t idx : keep) kept.push_back(train[idx]);
  }
  return out;
}

ItemTrainResult build_item_train(const InteractionStore& store,
                                 const std::vector<std::string>& cohort,
                                 const SplitBundle& splits,
                                 std::size_t per_item_cap, std::uint64_t seed) {
  if (per_item_cap < 1) throw std::invalid_argument("per-item cap must be >= 1");
  const std::unordered_set<std::string> cohort_set(cohort.begin(), cohort.end());
  ItemTrainResult result;

  for (const std::string& item_id : store.item_ids()) {
    std::vector<Interaction> samples;
    for (const Interaction* x : store.item_history(item_id)) {
      if (!cohort_set.count(x->user_id)) samples.push_back(*x);
    }
    if (samples.empty()) continue;
    if (samples.size() > per_item_cap) {
      // Per-item derived seed so the subsample does not depend on how many
      // other items were processed first.
      Rng rng(mix_seed(seed, fnv1a64(item_id)));
      auto keep = rng.sample_indices(samples.size(), per_item_cap);
      std::sort(keep.begin(), keep.end());
      std::vector<Interaction> capped;
      capped.reserve(per_item_cap);
      for (std::size_t idx : keep) capped.push_back(samples[idx]);
      samples = std::move(capped);
    }
    result.item_train[item_id] = std::move(samples);
  }

  // Coverage fallback: a referenced item whose every sample comes from a
  // cohort user still needs one entry. Prefer a sample that is already in
  // some user's training list over a held-out one.
  for (const std::string& item_id : splits.referenced_items()) {
    if (result.item_train.count(item_id)) continue;
    const auto history = store.item_history(item_id);
    const Interaction* fallback = nullptr;
    for (const Interaction* x : history) {
      auto it = splits.user_train.find(x->user_id);
      if (it == splits.user_train.end()) continue;
      const auto& train = it->second;
      const bool in_train =
          std::any_of(train.begin(), train.end(), [&](const Interaction& t) {
            return t.item_id == x->item_id && t.timestamp == x->timestamp;
          });
      if (in_train) {
        fallback = x;
        break;
      }
    }
    if (!fallback && !history.empty()) fallback = history.front();
    if (!fallback) {
      throw std::runtime_error("referenced item " + item_id +
                               " has no interactions in the store");
    }
    result.item_train[item_id] = {*fallback};
    ++result.fallback_items;
    warn("item " + item_id +
         " has no non-cohort samples; using one cohort sample as fallback");
  }
  return result;
}

void save_splits(const SplitBundle& splits, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = detail::open_output(dir / "user_train.jsonl");
    for (const auto& [_, train] : splits.user_train) {
      for (const Interaction& x : train) out << interaction_to_json(x).dump() << "\n";
    }
  }
  const auto write_heldout = [&](const std::map<std::string, HeldOutEntry>& entries,
                                 const char* filename) {
    auto out = detail::open_output(dir / filename);
    for (const auto& [user_id, entry] : entries) {
      detail::ordered_json row;
      row["user_id"] = user_id;
      row["item_id"] = entry.item_id;
      row["timestamp"] = entry.timestamp;
      out << row.dump() << "\n";
    }
  };
  write_heldout(splits.validation, "valid.jsonl");
  write_heldout(splits.test, "test.jsonl");
  {
    auto out = detail::open_output(dir / "item_train.jsonl");
    for (const auto& [_, samples] : splits.item_train) {
      for (const Interaction& x : samples) out << interaction_to_json(x).dump() << "\n";
    }
  }
}

SplitBundle load_splits(const std::filesystem::path& dir) {
  SplitBundle splits;
  detail::for_each_jsonl(dir / "user_train.jsonl", [&](const detail::ordered_json& row) {
    Interaction x = interaction_from_json(row);
    splits.user_train[x.user_id].push_back(std::move(x));
  });
  const auto read_heldout = [&](std::map<std::string, HeldOutEntry>& entries,
                                const char* filename) {
    detail::for_each_jsonl(dir / filename, [&](const detail::ordered_json& row) {
      entries[row.at("user_id").get<std::string>()] = {
          row.at("item_id").get<std::string>(),
          row.value("timestamp", std::int64_t{0})};
    });
  };
  read_heldout(splits.validation, "valid.jsonl");
  read_heldout(splits.test, "test.jsonl");
  detail::for_each_jsonl(dir / "item_train.jsonl", [&](const detail::ordered_json& row) {
    Interaction x = interaction_from_json(row);
    splits.item_train[x.item_id].push_back(std::move(x));
  });
  return splits;
}

std::vector<std::string> check_split_invariants(const InteractionStore& store,
                                                const SplitBundle& splits,
                                                std::size_t cap,
                                                std::size_t per_item_cap,
                                                bool newest_to_test) {
  std::vector<std::string> violations;
  (void)store;

  for (const auto& [user_id, train] : splits.user_train) {
    if (train.empty()) {
      violations.push_back("few-shot floor: user " + user_id + " has no training sample");
    }
    if (cap > 0 && train.size() > cap) {
      violations.push_back("few-shot cap: user " + user_id + " has " +
                           std::to_string(train.size()) + " > " + std::to_string(cap));
    }
    auto vit = splits.validation.find(user_id);
    auto tit = splits.test.find(user_id);
    if (vit == splits.validation.end() || tit == splits.test.end()) {
      violations.push_back("held-out: user " + user_id +
                           " missing validation or test entry");
      continue;
    }
    std::int64_t max_train_ts = 0;
    for (const Interaction& x : train) max_train_ts = std::max(max_train_ts, x.timestamp);
    const HeldOutEntry& newer = newest_to_test ? tit->second : vit->second;
    const HeldOutEntry& older = newest_to_test ? vit->second : tit->second;
    const char* newer_role = newest_to_test ? "test" : "validation";
    const char* older_role = newest_to_test ? "validation" : "test";
    if (newer.timestamp < older.timestamp) {
      violations.push_back("chronology: user " + user_id + " " +
                           std::string(newer_role) + " older than " + older_role);
    }
    if (!train.empty() && older.timestamp < max_train_ts) {
      violations.push_back("chronology: user " + user_id + " " +
                           std::string(older_role) +
                           " older than a training sample");
    }
  }

  for (const std::string& item_id : splits.referenced_items()) {
    auto it = splits.item_train.find(item_id);
    if (it == splits.item_train.end() || it->second.empty()) {
      violations.push_back("coverage: referenced item " + item_id +
                           " missing from item_train");
    }
  }
  for (const auto& [item_id, samples] : splits.item_train) {
    if (samples.size() > per_item_cap) {
      violations.push_back("per-item cap: item " + item_id + " has " +
                           std::to_string(samples.size()) + " > " +
                           std::to_string(per_item_cap));
    }
  }
  return violations;
}

}  // namespace fsrec::corpus
