#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace sitedetect {

bool is_valid_utf8(std::string_view bytes);

// Decoding assumes valid UTF-8; invalid sequences become U+FFFD.
std::u32string utf8_to_u32(std::string_view utf8);
std::string u32_to_utf8(std::u32string_view text);

// Unicode White_Space (includes NBSP and the ideographic space).
bool is_unicode_space(char32_t c);

// Zero-width, format (Cf) and non-whitespace control (Cc) characters.
bool is_stripped_char(char32_t c);

// NFC normalization.
std::string nfc(std::string_view utf8);

// Root-locale Unicode lowercasing.
std::string to_lower(std::string_view utf8);

// NFC, strip zero-width/control characters, collapse whitespace inside each
// paragraph to single spaces, drop empty paragraphs and join them with "\n\n".
// A paragraph break is any line break run containing a blank line.
std::string normalize_text(std::string_view raw);

// Number of Unicode-whitespace-separated tokens.
std::size_t count_words(std::string_view utf8);

// Converts bytes in `charset` (any ICU converter name or alias) to UTF-8.
// Returns nullopt for unknown charsets or illegal input.
std::optional<std::string> transcode_to_utf8(std::string_view bytes, std::string_view charset);

}  // namespace sitedetect
