#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace emocap::textproc {

// A tokenized caption. Tokens are non-empty and contain no whitespace.
using TokenSequence = std::vector<std::string>;

namespace detail {

// Decodes one UTF-8 codepoint starting at `pos`; advances `pos` past it.
// Malformed bytes are passed through as single-byte codepoints so that
// tokenization never throws on odd input.
inline char32_t decode_utf8(std::string_view s, std::size_t& pos) {
  const auto byte = [&](std::size_t i) {
    return static_cast<unsigned char>(s[i]);
  };
  unsigned char b0 = byte(pos);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xe0) == 0xc0) {
    len = 2;
    cp = b0 & 0x1f;
  } else if ((b0 & 0xf0) == 0xe0) {
    len = 3;
    cp = b0 & 0x0f;
  } else if ((b0 & 0xf8) == 0xf0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++pos;
    return b0;
  }
  if (pos + len > s.size()) {
    ++pos;
    return b0;
  }
  for (int i = 1; i < len; ++i) {
    unsigned char bi = byte(pos + i);
    if ((bi & 0xc0) != 0x80) {
      ++pos;
      return b0;
    }
    cp = (cp << 6) | (bi & 0x3f);
  }
  pos += len;
  return cp;
}

inline void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
}

inline bool is_space(char32_t cp) {
  switch (cp) {
    case U' ':
    case U'\t':
    case U'\n':
    case U'\r':
    case U'\v':
    case U'\f':
    case 0x00a0:  // no-break space
    case 0x3000:  // ideographic space
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200a;
  }
}

inline bool is_cjk(char32_t cp) {
  return (cp >= 0x2e80 && cp <= 0x2fdf) ||    // radicals
         (cp >= 0x3040 && cp <= 0x30ff) ||    // kana
         (cp >= 0x3400 && cp <= 0x4dbf) ||    // unified ext A
         (cp >= 0x4e00 && cp <= 0x9fff) ||    // unified
         (cp >= 0xac00 && cp <= 0xd7af) ||    // hangul syllables
         (cp >= 0xf900 && cp <= 0xfaff) ||    // compatibility ideographs
         (cp >= 0x20000 && cp <= 0x2ebef);    // unified ext B..F
}

// Unicode P* categories, approximated by block. Covers ASCII, Latin-1,
// general punctuation, CJK punctuation, and fullwidth forms.
inline bool is_punct(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= '!' && cp <= '/') || (cp >= ':' && cp <= '@') ||
           (cp >= '[' && cp <= '`') || (cp >= '{' && cp <= '~');
  }
  switch (cp) {
    case 0x00a1:  // inverted exclamation
    case 0x00a7:  // section sign
    case 0x00ab:  // left guillemet
    case 0x00b6:
    case 0x00b7:
    case 0x00bb:  // right guillemet
    case 0x00bf:  // inverted question
      return true;
    default:
      break;
  }
  return (cp >= 0x2010 && cp <= 0x2027) ||  // dashes, quotes, ellipsis
         (cp >= 0x2030 && cp <= 0x205e) ||  // per-mille .. general punct
         (cp >= 0x3001 && cp <= 0x3011) ||  // ideographic comma .. brackets
         (cp >= 0x3014 && cp <= 0x301f) ||
         cp == 0x30fb ||                    // katakana middle dot
         (cp >= 0xfe10 && cp <= 0xfe19) ||  // vertical forms
         (cp >= 0xfe30 && cp <= 0xfe4f) ||  // CJK compatibility forms
         (cp >= 0xfe50 && cp <= 0xfe6b) ||  // small form variants
         (cp >= 0xff01 && cp <= 0xff0f) ||  // fullwidth ! .. /
         (cp >= 0xff1a && cp <= 0xff20) ||  // fullwidth : .. @
         (cp >= 0xff3b && cp <= 0xff40) ||  // fullwidth [ .. `
         (cp >= 0xff5b && cp <= 0xff65);    // fullwidth { .. halfwidth dot
}

// ASCII and Latin-1 lowercasing; other scripts pass through unchanged.
inline char32_t to_lower(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 32;
  if (cp >= 0x00c0 && cp <= 0x00de && cp != 0x00d7) return cp + 32;
  return cp;
}

}  // namespace detail

// Deterministic tokenizer shared by the metrics and the embedder:
// lowercase, split on whitespace, strip leading/trailing punctuation per
// chunk, and split any chunk containing CJK codepoints into single
// codepoints. Empty results are dropped.
inline TokenSequence tokenize(std::string_view text) {
  TokenSequence out;
  std::vector<char32_t> chunk;
  const auto flush = [&] {
    if (chunk.empty()) return;
    std::size_t begin = 0;
    std::size_t end = chunk.size();
    while (begin < end && detail::is_punct(chunk[begin])) ++begin;
    while (end > begin && detail::is_punct(chunk[end - 1])) --end;
    if (begin == end) {
      chunk.clear();
      return;
    }
    bool has_cjk = false;
    for (std::size_t i = begin; i < end; ++i) {
      if (detail::is_cjk(chunk[i])) {
        has_cjk = true;
        break;
      }
    }
    if (has_cjk) {
      for (std::size_t i = begin; i < end; ++i) {
        std::string tok;
        detail::encode_utf8(chunk[i], tok);
        out.push_back(std::move(tok));
      }
    } else {
      std::string tok;
      for (std::size_t i = begin; i < end; ++i) {
        detail::encode_utf8(chunk[i], tok);
      }
      out.push_back(std::move(tok));
    }
    chunk.clear();
  };

  std::size_t pos = 0;
  while (pos < text.size()) {
    char32_t cp = detail::decode_utf8(text, pos);
    if (detail::is_space(cp)) {
      flush();
    } else {
      chunk.push_back(detail::to_lower(cp));
    }
  }
  flush();
  return out;
}

// Number of distinct token strings across all captions.
inline std::size_t unique_vocab(const std::vector<TokenSequence>& captions) {
  std::unordered_set<std::string_view> seen;
  for (const auto& caption : captions) {
    for (const auto& tok : caption) seen.insert(tok);
  }
  return seen.size();
}

inline std::string join(const TokenSequence& tokens,
                        std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.append(sep);
    out.append(tokens[i]);
  }
  return out;
}

}  // namespace emocap::textproc
