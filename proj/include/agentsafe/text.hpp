#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace agentsafe {

inline std::string to_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

/// Whitespace tokenizer; the only tokenizer used anywhere (token counts,
/// embeddings, cost units all agree on it).
inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::size_t token_count(std::string_view s) {
  std::size_t n = 0;
  bool in_tok = false;
  for (char c : s) {
    bool ws = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!ws && !in_tok) ++n;
    in_tok = !ws;
  }
  return n;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

/// FNV-1a, fully specified (std::hash is not portable across toolchains).
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

/// Case-insensitive substring test.
inline bool contains_ci(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return true;
  std::string h = to_lower(haystack);
  std::string n = to_lower(needle);
  return h.find(n) != std::string::npos;
}

}  // namespace agentsafe
