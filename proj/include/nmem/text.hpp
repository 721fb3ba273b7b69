#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Small text helpers shared by the mock backend, the embedder, the answer
// scorer and the card renderer. All tokenization is ASCII-only: bytes >= 0x80
// act as separators, which keeps results identical across platforms.
namespace nmem::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Maximal runs of [A-Za-z0-9], lowercased.
std::vector<std::string> tokenize(std::string_view s);

bool is_stopword(std::string_view lowered_token);

// tokenize() minus stopwords and single-character tokens, order preserved,
// duplicates kept.
std::vector<std::string> content_tokens(std::string_view s);

// Splits on '.', '!', '?' followed by whitespace or end of text, and on
// newlines. Terminal punctuation is dropped; empty pieces are skipped.
std::vector<std::string> split_sentences(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);

// First n Unicode code points of a UTF-8 string (never splits a sequence).
std::string utf8_prefix(std::string_view s, std::size_t n_codepoints);
std::size_t utf8_length(std::string_view s);

// True if `word` occurs in `s` delimited by non-alphanumeric characters.
bool contains_word(std::string_view s, std::string_view word);

// Lowercase, drop ASCII punctuation, collapse whitespace.
std::string normalize_for_match(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Up to `limit` most frequent content tokens, ties broken by first occurrence.
std::vector<std::string> top_tokens(const std::vector<std::string>& texts, std::size_t limit,
                                    const std::vector<std::string>& exclude = {});

std::uint64_t fnv1a64(std::string_view s);

} // namespace nmem::text
