#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Small text helpers shared by the segmentation, indexing and evaluation code.
// All case handling is ASCII-only; bytes >= 0x80 pass through unchanged.
namespace chunkrag::text {

bool is_space(char c) noexcept;
bool is_valid_utf8(std::string_view s) noexcept;

/// Decodes UTF-8 into code points. Invalid bytes decode to U+FFFD one byte at a time.
std::vector<char32_t> decode_utf8(std::string_view s);
void append_utf8(std::string& out, char32_t cp);

/// Number of code points (invalid bytes count as one each).
std::size_t codepoint_length(std::string_view s) noexcept;

std::string to_lower_ascii(std::string_view s);
std::string_view trim(std::string_view s) noexcept;
/// Replaces every run of whitespace with one space and trims the ends.
std::string collapse_whitespace(std::string_view s);

/// Lexical tokenizer used by BM25 and TF-IDF: lowercase, split on every
/// non-alphanumeric ASCII byte, drop empties. Non-ASCII bytes are word bytes.
std::vector<std::string> tokenize(std::string_view s);

/// Whitespace-delimited token count.
std::size_t whitespace_token_count(std::string_view s) noexcept;

/// Fixed-point rendering with the given number of decimals ("0.50").
std::string format_fixed(double value, int decimals);
/// Shortest decimal string that parses back to the same double.
std::string format_shortest(double value);

/// 64-bit FNV-1a with a caller-chosen seed folded into the offset basis.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) noexcept;

}  // namespace chunkrag::text
