#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qafe/error.hpp"

namespace qafe {

namespace detail {

// Decodes one UTF-8 codepoint starting at i; advances i past it.
// Malformed bytes are passed through as single-byte codepoints.
inline uint32_t decode_utf8(const std::string& s, std::size_t& i) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  if (c < 0x80) { ++i; return c; }
  int extra = (c >= 0xF0) ? 3 : (c >= 0xE0) ? 2 : (c >= 0xC0) ? 1 : 0;
  if (extra == 0 || i + extra >= s.size() + 1) { ++i; return c; }
  uint32_t cp = c & (0x3F >> extra);
  std::size_t j = i + 1;
  for (int k = 0; k < extra; ++k, ++j) {
    if (j >= s.size() || (static_cast<unsigned char>(s[j]) & 0xC0) != 0x80) {
      ++i;
      return c;
    }
    cp = (cp << 6) | (static_cast<unsigned char>(s[j]) & 0x3F);
  }
  i = j;
  return cp;
}

// Punctuation per the Unicode punctuation categories, pinned here as the
// ASCII set plus the common non-ASCII punctuation blocks.
inline bool is_punct_cp(uint32_t cp) {
  if (cp < 0x80) return std::ispunct(static_cast<int>(cp)) != 0;
  switch (cp) {
    case 0x00A1: case 0x00A7: case 0x00AB: case 0x00B6: case 0x00B7:
    case 0x00BB: case 0x00BF:
      return true;
    default:
      break;
  }
  if (cp >= 0x2010 && cp <= 0x2027) return true;  // dashes, quotes, bullets
  if (cp >= 0x2030 && cp <= 0x205E) return true;  // permille .. general punct
  if (cp >= 0x3001 && cp <= 0x3003) return true;  // CJK comma, stop
  return false;
}

}  // namespace detail

/// Community-standard answer normalization: lowercase, strip punctuation,
/// drop the articles {a, an, the} as whole tokens, collapse whitespace.
inline std::string normalize(const std::string& text) {
  std::string stripped;
  stripped.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t start = i;
    uint32_t cp = detail::decode_utf8(text, i);
    if (detail::is_punct_cp(cp)) continue;
    if (cp < 0x80) {
      stripped.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(text[start]))));
    } else {
      stripped.append(text, start, i - start);
    }
  }
  std::string out;
  out.reserve(stripped.size());
  std::size_t pos = 0;
  while (pos < stripped.size()) {
    while (pos < stripped.size() &&
           std::isspace(static_cast<unsigned char>(stripped[pos])))
      ++pos;
    std::size_t end = pos;
    while (end < stripped.size() &&
           !std::isspace(static_cast<unsigned char>(stripped[end])))
      ++end;
    if (end > pos) {
      std::string tok = stripped.substr(pos, end - pos);
      if (tok != "a" && tok != "an" && tok != "the") {
        if (!out.empty()) out.push_back(' ');
        out += tok;
      }
    }
    pos = end;
  }
  return out;
}

inline std::vector<std::string> normalized_tokens(const std::string& text) {
  std::string n = normalize(text);
  std::vector<std::string> toks;
  std::size_t pos = 0;
  while (pos < n.size()) {
    std::size_t end = n.find(' ', pos);
    if (end == std::string::npos) end = n.size();
    toks.push_back(n.substr(pos, end - pos));
    pos = end + 1;
  }
  return toks;
}

inline int exact_match(const std::string& reference, const std::string& candidate) {
  return normalize(reference) == normalize(candidate) ? 1 : 0;
}

/// Token-level F1 over normalized-token multisets. Both empty -> 1,
/// exactly one empty -> 0.
inline double token_f1(const std::string& reference, const std::string& candidate) {
  std::vector<std::string> r = normalized_tokens(reference);
  std::vector<std::string> c = normalized_tokens(candidate);
  if (r.empty() && c.empty()) return 1.0;
  if (r.empty() || c.empty()) return 0.0;
  std::map<std::string, int> counts;
  for (const auto& t : r) ++counts[t];
  int common = 0;
  for (const auto& t : c) {
    auto it = counts.find(t);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  double precision = static_cast<double>(common) / c.size();
  double recall = static_cast<double>(common) / r.size();
  return 2.0 * precision * recall / (precision + recall);
}

enum class OverlapMetric { EM, F1, LERC, IS_ANSWERED_INPUT };

inline const char* overlap_metric_name(OverlapMetric m) {
  switch (m) {
    case OverlapMetric::EM: return "EM";
    case OverlapMetric::F1: return "F1";
    case OverlapMetric::LERC: return "LERC";
    case OverlapMetric::IS_ANSWERED_INPUT: return "IS_ANSWERED_INPUT";
  }
  return "?";
}

inline OverlapMetric overlap_metric_from_name(const std::string& name) {
  if (name == "EM") return OverlapMetric::EM;
  if (name == "F1") return OverlapMetric::F1;
  if (name == "LERC") return OverlapMetric::LERC;
  if (name == "IS_ANSWERED_INPUT") return OverlapMetric::IS_ANSWERED_INPUT;
  throw Error(ErrorCode::ConfigError, "unknown overlap metric: " + name);
}

struct OverlapConfig {
  std::vector<OverlapMetric> metrics{OverlapMetric::EM, OverlapMetric::F1,
                                     OverlapMetric::LERC,
                                     OverlapMetric::IS_ANSWERED_INPUT};
  OverlapMetric primary_metric = OverlapMetric::LERC;
  bool lerc_rescale = true;  // value -> (value - 1) / 4

  void validate() const {
    if (std::find(metrics.begin(), metrics.end(), primary_metric) == metrics.end())
      throw Error(ErrorCode::ConfigError, "primary_metric not in metrics");
  }
};

}  // namespace qafe
