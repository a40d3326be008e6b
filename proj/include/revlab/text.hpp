#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace revlab {

std::string_view trim(std::string_view s);

/// Lower-cases ASCII letters; other bytes pass through untouched.
std::string to_lower(std::string_view s);

/// Whitespace tokenizer used everywhere text is compared or encoded.
/// Tokens are lower-cased so lookups are case-normalized.
std::vector<std::string> tokenize(std::string_view text);

/// Splits on runs of whitespace without changing case.
std::vector<std::string> split_whitespace(std::string_view text);

std::string join(std::span<const std::string> parts, std::string_view sep);

std::vector<std::string> split(std::string_view s, char delim);

/// 64-bit FNV-1a, rendered as 16 hex digits. Used for config fingerprints.
std::string fnv1a_hex(std::string_view data);

/// Shortest round-trippable rendering of a double ("%.17g").
std::string format_double(double v);

}  // namespace revlab
