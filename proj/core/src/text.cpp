#include "fsrec/text.hpp"

#include <cctype>

namespace fsrec {

namespace {

bool is_space_codepoint(char32_t cp) {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' ||
         cp == U'\f' || cp == U'\v' || cp == 0x3000;  // ideographic space
}

}  // namespace

bool is_cjk_codepoint(char32_t cp) {
  return (cp >= 0x2E80 && cp <= 0x2EFF) ||   // CJK radicals supplement
         (cp >= 0x3000 && cp <= 0x303F) ||   // CJK symbols and punctuation
         (cp >= 0x3040 && cp <= 0x30FF) ||   // hiragana, katakana
         (cp >= 0x3100 && cp <= 0x312F) ||   // bopomofo
         (cp >= 0x31F0 && cp <= 0x31FF) ||   // katakana phonetic extensions
         (cp >= 0x3400 && cp <= 0x4DBF) ||   // CJK extension A
         (cp >= 0x4E00 && cp <= 0x9FFF) ||   // CJK unified ideographs
         (cp >= 0xAC00 && cp <= 0xD7AF) ||   // hangul syllables
         (cp >= 0xF900 && cp <= 0xFAFF) ||   // CJK compatibility ideographs
         (cp >= 0xFF00 && cp <= 0xFFEF) ||   // fullwidth and halfwidth forms
         (cp >= 0x20000 && cp <= 0x2A6DF);   // CJK extension B
}

char32_t decode_utf8(std::string_view text, std::size_t& pos) {
  const auto byte = [&](std::size_t i) {
    return static_cast<unsigned char>(text[i]);
  };
  const unsigned char b0 = byte(pos);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++pos;
    return 0xFFFD;
  }
  if (pos + len > text.size()) {
    ++pos;
    return 0xFFFD;
  }
  for (std::size_t i = 1; i < len; ++i) {
    if ((byte(pos + i) & 0xC0) != 0x80) {
      ++pos;
      return 0xFFFD;
    }
    cp = (cp << 6) | (byte(pos + i) & 0x3F);
  }
  pos += len;
  return cp;
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t pos = 0;
  std::size_t run_begin = 0;
  bool in_run = false;
  while (pos < text.size()) {
    const std::size_t cp_begin = pos;
    const char32_t cp = decode_utf8(text, pos);
    if (is_space_codepoint(cp)) {
      if (in_run) {
        tokens.push_back({run_begin, cp_begin, false});
        in_run = false;
      }
    } else if (is_cjk_codepoint(cp)) {
      if (in_run) {
        tokens.push_back({run_begin, cp_begin, false});
        in_run = false;
      }
      tokens.push_back({cp_begin, pos, true});
    } else {
      if (!in_run) {
        run_begin = cp_begin;
        in_run = true;
      }
    }
  }
  if (in_run) tokens.push_back({run_begin, text.size(), false});
  return tokens;
}

std::size_t count_units(std::string_view text) { return tokenize(text).size(); }

std::string truncate_to_units(std::string_view text, std::size_t max_units) {
  const auto tokens = tokenize(text);
  if (tokens.size() <= max_units) return std::string(text);
  if (max_units == 0) return std::string();
  return std::string(text.substr(0, tokens[max_units - 1].end));
}

std::string normalize_token(std::string_view token_text) {
  std::string out;
  out.reserve(token_text.size());
  for (char c : token_text) {
    out.push_back(static_cast<char>(
        std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  std::string current;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t cp_begin = pos;
    const char32_t cp = decode_utf8(text, pos);
    const bool terminator = cp == U'.' || cp == U'!' || cp == U'?' ||
                            cp == U'\n' || cp == 0x3002 ||  // 。
                            cp == 0xFF01 ||                 // ！
                            cp == 0xFF1F;                   // ？
    if (terminator) {
      if (cp != U'\n') current.append(text.substr(cp_begin, pos - cp_begin));
      if (count_units(current) > 0) sentences.push_back(current);
      current.clear();
    } else if (!current.empty() ||
               (cp != U' ' && cp != U'\t' && cp != U'\r')) {
      // inter-sentence whitespace is never a sentence prefix
      current.append(text.substr(cp_begin, pos - cp_begin));
    }
  }
  if (count_units(current) > 0) sentences.push_back(current);
  return sentences;
}

}  // namespace fsrec
