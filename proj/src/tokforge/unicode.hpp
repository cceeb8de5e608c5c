#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

// UTF-8 plumbing and the handful of Unicode properties the tokenizer needs.
// Character data comes from ICU.
namespace tokforge::unicode {

inline constexpr char32_t kReplacementChar = 0xFFFD;

// Decodes one code point starting at `pos`. Returns the number of bytes
// consumed (>= 1). Malformed input yields U+FFFD with length 1.
std::size_t decode(std::string_view s, std::size_t pos, char32_t& cp);

// Byte length of the UTF-8 sequence starting at s[pos], clamped to the input.
std::size_t char_length(std::string_view s, std::size_t pos);

void append(std::string& out, char32_t cp);

std::size_t length(std::string_view s);

bool is_valid_utf8(std::string_view s);

std::string nfkc(std::string_view s);

bool is_letter(char32_t cp);
bool is_number(char32_t cp);
bool is_whitespace(char32_t cp);

// True when every code point shares one script, treating Common and
// Inherited as compatible with anything.
bool is_single_script(std::string_view s);

// Printable-unit remapping of the 256 byte values used by byte-level BPE.
const std::array<char32_t, 256>& byte_to_unit();
std::string bytes_to_units(std::string_view raw);
std::optional<std::string> units_to_bytes(std::string_view mapped);

}  // namespace tokforge::unicode
