#include "seclr/text.hpp"

#include <fstream>

#include "seclr/common.hpp"

namespace seclr {

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  size_t i = 0;
  const auto fail = [&](size_t at) {
    throw ParseError("invalid UTF-8 byte at offset " + std::to_string(at));
  };
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
      out.push_back(b0);
      ++i;
      continue;
    }
    int len;
    char32_t cp;
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
      fail(i);
      return out;
    }
    if (i + len > s.size()) fail(i);
    for (int k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xc0) != 0x80) fail(i + k);
      cp = (cp << 6) | (b & 0x3f);
    }
    static constexpr char32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len]) fail(i);                  // overlong
    if (cp >= 0xd800 && cp <= 0xdfff) fail(i);    // surrogate
    if (cp > 0x10ffff) fail(i);
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string encode_utf8(const std::u32string& s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) {
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
  return out;
}

namespace {

char32_t to_lower(char32_t cp) {
  if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
  // Latin-1 Supplement uppercase block, skipping the multiplication sign.
  if (cp >= 0xc0 && cp <= 0xde && cp != 0xd7) return cp + 0x20;
  // Latin Extended-A: case pairs alternate; three subranges plus specials.
  if (cp == 0x130) return U'i';   // I with dot above
  if (cp == 0x178) return 0xff;   // Y with diaeresis
  if (cp >= 0x100 && cp <= 0x137 && (cp & 1) == 0) return cp + 1;
  if (cp >= 0x139 && cp <= 0x148 && (cp & 1) == 1) return cp + 1;
  if (cp >= 0x14a && cp <= 0x177 && (cp & 1) == 0) return cp + 1;
  if (cp >= 0x179 && cp <= 0x17e && (cp & 1) == 1) return cp + 1;
  return cp;
}

// Base letter of a precomposed Latin character whose canonical
// decomposition is base + combining marks. Covers Latin-1 Supplement
// and Latin Extended-A (lowercase; uppercase is handled by lowering
// first). Returns 0 when the character has no canonical decomposition.
char32_t decomposed_base(char32_t cp) {
  if (cp >= 0xe0 && cp <= 0xe5) return U'a';
  if (cp == 0xe7) return U'c';
  if (cp >= 0xe8 && cp <= 0xeb) return U'e';
  if (cp >= 0xec && cp <= 0xef) return U'i';
  if (cp == 0xf1) return U'n';
  if (cp >= 0xf2 && cp <= 0xf6) return U'o';
  if (cp >= 0xf9 && cp <= 0xfc) return U'u';
  if (cp == 0xfd || cp == 0xff) return U'y';
  switch (cp) {
    case 0x101: case 0x103: case 0x105: return U'a';
    case 0x107: case 0x109: case 0x10b: case 0x10d: return U'c';
    case 0x10f: return U'd';
    case 0x113: case 0x115: case 0x117: case 0x119: case 0x11b: return U'e';
    case 0x11d: case 0x11f: case 0x121: case 0x123: return U'g';
    case 0x125: return U'h';
    case 0x129: case 0x12b: case 0x12d: case 0x12f: return U'i';
    case 0x135: return U'j';
    case 0x137: return U'k';
    case 0x13a: case 0x13c: case 0x13e: return U'l';
    case 0x144: case 0x146: case 0x148: return U'n';
    case 0x14d: case 0x14f: case 0x151: return U'o';
    case 0x155: case 0x157: case 0x159: return U'r';
    case 0x15b: case 0x15d: case 0x15f: case 0x161: return U's';
    case 0x163: case 0x165: return U't';
    case 0x169: case 0x16b: case 0x16d: case 0x16f: case 0x171: case 0x173:
      return U'u';
    case 0x175: return U'w';
    case 0x177: return U'y';
    case 0x17a: case 0x17c: case 0x17e: return U'z';
    default: return 0;
  }
}

bool is_combining_mark(char32_t cp) { return cp >= 0x300 && cp <= 0x36f; }

// Token boundary: whitespace plus punctuation. Typographic punctuation
// (curly quotes, dashes, ellipsis, NBSP) is folded in here, which is
// where the punctuation-normalization step lands after tokenization
// since all punctuation is dropped from tokens.
bool is_delimiter(char32_t cp) {
  if (cp < 0x80) {
    const bool alnum = (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z') ||
                       (cp >= U'0' && cp <= U'9');
    return !alnum;
  }
  if (cp == 0xa0) return true;  // NBSP
  if (cp >= 0xa1 && cp <= 0xbf) return cp != 0xaa && cp != 0xb5 && cp != 0xba;
  if (cp == 0xd7 || cp == 0xf7) return true;
  if (cp >= 0x2000 && cp <= 0x206f) return true;  // general punctuation
  if (cp >= 0x3000 && cp <= 0x303f) return true;
  if ((cp >= 0xff01 && cp <= 0xff0f) || (cp >= 0xff1a && cp <= 0xff20) ||
      (cp >= 0xff3b && cp <= 0xff40) || (cp >= 0xff5b && cp <= 0xff65))
    return true;
  return false;
}

}  // namespace

std::vector<std::string> normalize_text(std::string_view raw,
                                        const StopwordSet& stopwords) {
  const std::u32string cps = decode_utf8(raw);
  std::vector<std::string> tokens;
  std::u32string current;
  const auto flush = [&]() {
    if (current.empty()) return;
    std::u32string stripped;
    stripped.reserve(current.size());
    for (char32_t cp : current) {
      if (is_combining_mark(cp)) continue;
      const char32_t base = decomposed_base(cp);
      stripped.push_back(base ? base : cp);
    }
    current.clear();
    if (stripped.empty()) return;
    std::string token = encode_utf8(stripped);
    if (stopwords.count(token) == 0) tokens.push_back(std::move(token));
  };
  for (char32_t cp : cps) {
    const char32_t lc = to_lower(cp);
    if (is_delimiter(lc)) {
      flush();
    } else {
      current.push_back(lc);
    }
  }
  flush();
  return tokens;
}

StopwordSet load_stopwords(const std::string& path) {
  StopwordSet set;
  if (path.empty()) return set;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open stopword list: " + path);
  std::string line;
  static const StopwordSet kNone;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    for (auto& tok : normalize_text(line, kNone)) set.insert(std::move(tok));
  }
  return set;
}

}  // namespace seclr
