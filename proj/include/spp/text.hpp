#pragma once

// Small text utilities shared across the library: trimming, splitting,
// and the normalization applied before any string matching.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace spp::text {

inline bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

inline std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  }
  return true;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == '\n') {
      std::string_view line = s.substr(start, i - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      out.emplace_back(line);
      start = i + 1;
    }
  }
  if (!s.empty() && s.back() == '\n') out.pop_back();
  return out;
}

inline void replace_all(std::string& s, std::string_view from, std::string_view to) {
  if (from.empty()) return;
  size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

// FNV-1a, used for deterministic per-instance choices in fixtures and
// question shuffling seeds. Not for integrity; manifests use SHA-256.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace detail {

// Decodes one UTF-8 codepoint starting at i; advances i. Invalid bytes are
// returned as-is (latin-1 style) so matching never throws on bad input.
inline std::uint32_t decode_utf8(std::string_view s, size_t& i) {
  unsigned char c0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](size_t k) {
    return i + k < s.size() &&
           (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  if (c0 < 0x80) {
    ++i;
    return c0;
  }
  if ((c0 & 0xE0) == 0xC0 && cont(1)) {
    std::uint32_t cp = (c0 & 0x1Fu) << 6 |
                       (static_cast<unsigned char>(s[i + 1]) & 0x3Fu);
    i += 2;
    return cp;
  }
  if ((c0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    std::uint32_t cp = (c0 & 0x0Fu) << 12 |
                       (static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 6 |
                       (static_cast<unsigned char>(s[i + 2]) & 0x3Fu);
    i += 3;
    return cp;
  }
  if ((c0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    std::uint32_t cp = (c0 & 0x07u) << 18 |
                       (static_cast<unsigned char>(s[i + 1]) & 0x3Fu) << 12 |
                       (static_cast<unsigned char>(s[i + 2]) & 0x3Fu) << 6 |
                       (static_cast<unsigned char>(s[i + 3]) & 0x3Fu);
    i += 4;
    return cp;
  }
  ++i;
  return c0;
}

inline void encode_utf8(std::uint32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace detail

// Normalization applied to both sides of every match (answer aliases,
// generations, word lists, persona names):
//   - compatibility folds for the characters that matter in practice:
//     fullwidth ASCII, common ligatures, Unicode spaces, curly quotes
//   - case fold (ASCII plus Latin-1 letters)
//   - whitespace runs collapsed to a single space, ends trimmed
// Punctuation is preserved; diacritics are preserved. Aliases that need
// looser matching should be added as extra aliases in the dataset.
inline std::string fold_for_match(std::string_view s) {
  std::string folded;
  folded.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    std::uint32_t cp = detail::decode_utf8(s, i);
    // Unicode space separators and no-break space -> ASCII space.
    if (cp == 0x00A0 || (cp >= 0x2000 && cp <= 0x200B) || cp == 0x202F ||
        cp == 0x205F || cp == 0x3000 || cp == 0x0009) {
      folded.push_back(' ');
      continue;
    }
    // Fullwidth ASCII block.
    if (cp >= 0xFF01 && cp <= 0xFF5E) cp = cp - 0xFF01 + 0x21;
    switch (cp) {
      case 0x2018: case 0x2019: cp = '\''; break;  // curly single quotes
      case 0x201C: case 0x201D: cp = '"'; break;   // curly double quotes
      case 0xFB01: folded += "fi"; continue;
      case 0xFB02: folded += "fl"; continue;
      default: break;
    }
    if (cp < 0x80) {
      cp = static_cast<std::uint32_t>(
          std::tolower(static_cast<unsigned char>(cp)));
    } else if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) {
      cp += 0x20;  // Latin-1 uppercase letters
    }
    detail::encode_utf8(cp, folded);
  }
  // Collapse whitespace runs.
  std::string out;
  out.reserve(folded.size());
  bool in_ws = false;
  for (char c : folded) {
    if (c == ' ' || c == '\n' || c == '\r' || c == '\t' || c == '\f' || c == '\v') {
      in_ws = true;
      continue;
    }
    if (in_ws && !out.empty()) out.push_back(' ');
    in_ws = false;
    out.push_back(c);
  }
  return out;
}

// Persona name normalization: fold_for_match plus dropping a trailing
// "(you)" leader tag.
inline std::string normalize_persona(std::string_view name) {
  std::string n = fold_for_match(name);
  const std::string_view tag = "(you)";
  if (n.size() >= tag.size() &&
      std::string_view(n).substr(n.size() - tag.size()) == tag) {
    n.resize(n.size() - tag.size());
    while (!n.empty() && n.back() == ' ') n.pop_back();
  }
  return n;
}

}  // namespace spp::text
