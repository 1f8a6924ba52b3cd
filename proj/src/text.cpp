#include "tracealign/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <unordered_set>

#include <openssl/evp.h>

namespace tracealign::text {

namespace {

bool is_token_byte(unsigned char c) {
  return std::isalnum(c) != 0 || c >= 0x80;
}

const std::unordered_set<std::string_view>& stopwords() {
  static const std::unordered_set<std::string_view> words = {
      "a",     "an",    "and",   "are",  "as",    "at",    "be",    "been",  "but",
      "by",    "can",   "could", "do",   "does",  "for",   "from",  "had",   "has",
      "have",  "he",    "her",   "his",  "i",     "if",    "in",    "into",  "is",
      "it",    "its",   "me",    "my",   "no",    "not",   "now",   "of",    "on",
      "or",    "our",   "please", "she", "so",    "than",  "that",  "the",   "their",
      "them",  "then",  "there", "these", "they", "this",  "to",    "up",    "us",
      "was",   "we",    "were",  "what", "when",  "which", "while", "who",   "will",
      "with",  "would", "you",   "your", "s",     "t",     "next",  "again", "all",
      "any",   "also",  "about", "after", "before", "using", "use",  "should", "must",
  };
  return words;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (is_token_byte(c)) {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

bool is_stopword(std::string_view token) { return stopwords().contains(token); }

std::vector<std::string> content_tokens(std::string_view s) {
  auto toks = tokenize(s);
  std::erase_if(toks, [](const std::string& t) { return is_stopword(t); });
  return toks;
}

std::string trim(std::string_view s) {
  auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0, e = s.size();
  while (b < e && issp(s[b])) ++b;
  while (e > b && issp(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_sentences(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    auto t = trim(s.substr(start, end - start));
    if (!t.empty()) out.push_back(std::move(t));
    start = end;
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '\n') {
      flush(i);
      start = i + 1;
    } else if (c == '.' || c == '!' || c == '?') {
      bool at_end = i + 1 == s.size();
      if (at_end || std::isspace(static_cast<unsigned char>(s[i + 1]))) flush(i + 1);
    }
  }
  flush(s.size());
  return out;
}

bool contains_phrase(const std::vector<std::string>& tokens, std::string_view phrase) {
  auto needle = tokenize(phrase);
  if (needle.empty() || needle.size() > tokens.size()) return false;
  return std::search(tokens.begin(), tokens.end(), needle.begin(), needle.end()) != tokens.end();
}

std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr);
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(digits[md[i] >> 4]);
    out.push_back(digits[md[i] & 0xF]);
  }
  return out;
}

std::vector<std::string> top_tokens(const std::vector<std::string>& texts, std::size_t k) {
  std::map<std::string, std::size_t> freq;
  for (const auto& t : texts)
    for (auto& tok : content_tokens(t)) ++freq[tok];
  std::vector<std::pair<std::string, std::size_t>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < items.size() && i < k; ++i) out.push_back(items[i].first);
  return out;
}

}  // namespace tracealign::text
