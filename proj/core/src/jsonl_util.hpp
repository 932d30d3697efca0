#pragma once

// Internal JSONL helpers. Kept out of public headers so the installed
// package does not depend on the vendored json library.

#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace fsrec::detail {

using ordered_json = nlohmann::ordered_json;

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  return out;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path.string());
  }
  return in;
}

// Calls `fn` once per non-empty line with the parsed object.
inline void for_each_jsonl(const std::filesystem::path& path,
                           const std::function<void(const ordered_json&)>& fn) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    ordered_json row;
    try {
      row = ordered_json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": bad JSON: " + e.what());
    }
    fn(row);
  }
}

}  // namespace fsrec::detail
