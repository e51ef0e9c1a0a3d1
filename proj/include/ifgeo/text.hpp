#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ifgeo::text {

std::string_view trim(std::string_view s);

std::string to_lower_ascii(std::string_view s);

/// Lowercased ASCII alphanumeric runs. Bytes >= 0x80 are kept inside tokens
/// so UTF-8 words survive as opaque units.
std::vector<std::string> tokenize(std::string_view s);

/// Tokens joined by single spaces; the form used for duplicate detection.
std::string normalize(std::string_view s);

bool is_stopword(std::string_view token);

/// Tokens with stopwords and single characters removed.
std::vector<std::string> content_terms(std::string_view s);

/// Jaccard similarity of the normalized token sets. Two empty sets give 1.
double token_jaccard(std::string_view a, std::string_view b);

/// Number of whitespace-separated tokens.
std::size_t count_words(std::string_view s);

/// Longest common substring, ASCII case-insensitive. Returns its length and
/// the offset of the match inside `haystack`.
struct CommonSubstring {
    std::size_t haystack_offset = 0;
    std::size_t length = 0;
};
CommonSubstring longest_common_substring(std::string_view haystack, std::string_view needle);

/// Where an edit-request excerpt sits in a document body.
struct AnchorMatch {
    std::size_t offset = 0;
    std::size_t length = 0;
    double similarity = 0.0;  // matched bytes / excerpt bytes
    bool locatable = false;
};

inline constexpr double kAnchorSimilarityFloor = 0.6;

AnchorMatch locate_excerpt(std::string_view body, std::string_view excerpt,
                           double floor = kAnchorSimilarityFloor);

/// Symmetric excerpt similarity: common-substring length over the shorter
/// trimmed string.
double excerpt_similarity(std::string_view a, std::string_view b);

/// Lowercase hex encoding.
std::string to_hex(std::string_view bytes);

}  // namespace ifgeo::text
