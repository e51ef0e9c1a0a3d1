#include "ifgeo/text.hpp"

#include <algorithm>
#include <cstdint>
#include <array>
#include <set>
#include <unordered_set>

namespace ifgeo::text {

namespace {

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_token_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c >= 0x80;
}

char lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

const std::unordered_set<std::string_view>& stopwords() {
    static const std::unordered_set<std::string_view> words{
        "a",     "about", "above", "after", "again",  "all",   "also",  "am",    "an",
        "and",   "any",   "are",   "as",    "at",     "be",    "been",  "before", "being",
        "below", "between", "both", "but",  "by",     "can",   "could", "did",   "do",
        "does",  "doing", "down",  "during", "each",  "few",   "for",   "from",  "further",
        "had",   "has",   "have",  "having", "he",    "her",   "here",  "hers",  "him",
        "his",   "how",   "i",     "if",    "in",     "into",  "is",    "it",    "its",
        "itself", "just", "may",   "me",    "might",  "more",  "most",  "must",  "my",
        "no",    "nor",   "not",   "now",   "of",     "off",   "on",    "once",  "only",
        "or",    "other", "our",   "out",   "over",   "own",   "same",  "she",   "should",
        "so",    "some",  "such",  "than",  "that",   "the",   "their", "them",  "then",
        "there", "these", "they",  "this",  "those",  "through", "to",  "too",   "under",
        "until", "up",    "very",  "was",   "we",     "were",  "what",  "when",  "where",
        "which", "while", "who",   "whom",  "why",    "will",  "with",  "would", "you",
        "your",  "yours", "many",  "much",  "often",  "well",  "one",   "two",   "like",
        "use",   "used",  "using", "within", "without", "however", "because", "include",
        "includes", "including", "can't", "cannot", "shall", "upon", "via", "vs",
    };
    return words;
}

}  // namespace

std::string_view trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), lower);
    return out;
}

std::vector<std::string> tokenize(std::string_view s) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : s) {
        if (is_token_byte(static_cast<unsigned char>(c))) {
            cur.push_back(lower(c));
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

std::string normalize(std::string_view s) {
    std::string out;
    for (const auto& t : tokenize(s)) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

bool is_stopword(std::string_view token) { return stopwords().contains(token); }

std::vector<std::string> content_terms(std::string_view s) {
    std::vector<std::string> out;
    for (auto& t : tokenize(s)) {
        if (t.size() > 1 && !is_stopword(t)) out.push_back(std::move(t));
    }
    return out;
}

double token_jaccard(std::string_view a, std::string_view b) {
    auto ta = tokenize(a);
    auto tb = tokenize(b);
    std::set<std::string> sa(ta.begin(), ta.end());
    std::set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 1.0;
    std::size_t inter = 0;
    for (const auto& t : sa) inter += sb.count(t);
    const std::size_t uni = sa.size() + sb.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::size_t count_words(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : s) {
        if (is_space(static_cast<unsigned char>(c))) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++n;
        }
    }
    return n;
}

CommonSubstring longest_common_substring(std::string_view haystack, std::string_view needle) {
    CommonSubstring best;
    if (haystack.empty() || needle.empty()) return best;
    const std::size_t m = needle.size();
    std::vector<std::uint32_t> prev(m + 1, 0);
    std::vector<std::uint32_t> cur(m + 1, 0);
    for (std::size_t i = 1; i <= haystack.size(); ++i) {
        const char hc = lower(haystack[i - 1]);
        for (std::size_t j = 1; j <= m; ++j) {
            if (hc == lower(needle[j - 1])) {
                cur[j] = prev[j - 1] + 1;
                if (cur[j] > best.length) {
                    best.length = cur[j];
                    best.haystack_offset = i - cur[j];
                }
            } else {
                cur[j] = 0;
            }
        }
        std::swap(prev, cur);
    }
    return best;
}

AnchorMatch locate_excerpt(std::string_view body, std::string_view excerpt, double floor) {
    AnchorMatch match;
    const auto needle = trim(excerpt);
    if (needle.empty() || body.empty()) return match;

    if (auto pos = body.find(needle); pos != std::string_view::npos) {
        match.offset = pos;
        match.length = needle.size();
        match.similarity = 1.0;
        match.locatable = true;
        return match;
    }
    const auto lcs = longest_common_substring(body, needle);
    match.offset = lcs.haystack_offset;
    match.length = lcs.length;
    match.similarity = static_cast<double>(lcs.length) / static_cast<double>(needle.size());
    match.locatable = match.similarity >= floor;
    return match;
}

double excerpt_similarity(std::string_view a, std::string_view b) {
    const auto ta = trim(a);
    const auto tb = trim(b);
    if (ta.empty() || tb.empty()) return ta.empty() && tb.empty() ? 1.0 : 0.0;
    const auto& longer = ta.size() >= tb.size() ? ta : tb;
    const auto& shorter = ta.size() >= tb.size() ? tb : ta;
    const auto lcs = longest_common_substring(longer, shorter);
    return static_cast<double>(lcs.length) / static_cast<double>(shorter.size());
}

std::string to_hex(std::string_view bytes) {
    static constexpr std::array<char, 16> digits{'0', '1', '2', '3', '4', '5', '6', '7',
                                                 '8', '9', 'a', 'b', 'c', 'd', 'e', 'f'};
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char c : bytes) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 0xF]);
    }
    return out;
}

}  // namespace ifgeo::text
