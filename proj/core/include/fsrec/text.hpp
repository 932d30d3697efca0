#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fsrec {

// Shared text machinery. The same tokenization feeds the prompt budget
// accounting, the offline summarizer, and the hash embedder, so all three
// agree on what a "unit" is.
//
// Counting rule: one unit per CJK codepoint, one unit per whitespace-delimited
// non-CJK run (CJK codepoints also break runs). Deterministic and
// provider-independent; not any provider's exact tokenizer.

struct Token {
  std::size_t begin = 0;  // byte offset into the source text
  std::size_t end = 0;    // one past the last byte
  bool cjk = false;

  std::string_view view(std::string_view source) const {
    return source.substr(begin, end - begin);
  }
};

bool is_cjk_codepoint(char32_t cp);

// Decodes one UTF-8 codepoint starting at `pos`; advances `pos` past it.
// Malformed bytes decode as U+FFFD one byte at a time (never throws).
char32_t decode_utf8(std::string_view text, std::size_t& pos);

std::vector<Token> tokenize(std::string_view text);

// Number of counting units in `text` under the rule above.
std::size_t count_units(std::string_view text);

// Longest prefix of `text`, cut at a token boundary, with at most
// `max_units` units.
std::string truncate_to_units(std::string_view text, std::size_t max_units);

// Lowercased (ASCII-only fold) token text, e.g. for frequency counting.
std::string normalize_token(std::string_view token_text);

// Splits into sentences on ASCII and fullwidth terminators and newlines.
// Whitespace-only fragments are dropped.
std::vector<std::string> split_sentences(std::string_view text);

}  // namespace fsrec
