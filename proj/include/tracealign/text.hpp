#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tracealign::text {

// Lowercases ASCII and splits on anything that is not an ASCII letter/digit.
// Bytes >= 0x80 are kept inside tokens so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view s);

bool is_stopword(std::string_view token);

// Tokens of `s` with stopwords removed, order preserved.
std::vector<std::string> content_tokens(std::string_view s);

// Splits on '.', '!', '?' followed by whitespace or end of text, and on newlines.
// Returned sentences are trimmed and non-empty.
std::vector<std::string> split_sentences(std::string_view s);

// True when the token sequence of `phrase` occurs contiguously in `tokens`.
bool contains_phrase(const std::vector<std::string>& tokens, std::string_view phrase);

std::string trim(std::string_view s);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view s) noexcept;

std::string hex64(std::uint64_t v);

// Lowercase hex SHA-256 of raw bytes.
std::string sha256_hex(std::string_view bytes);

// Up to `k` most frequent non-stopword tokens over `texts`; ties alphabetical.
std::vector<std::string> top_tokens(const std::vector<std::string>& texts, std::size_t k);

}  // namespace tracealign::text
