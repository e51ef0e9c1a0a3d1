#include <gtest/gtest.h>

#include <random>

#include "ifgeo/text.hpp"

using namespace ifgeo::text;

TEST(Text, TrimAndLower) {
    EXPECT_EQ(trim("  a b \n\t"), "a b");
    EXPECT_EQ(trim("   "), "");
    EXPECT_EQ(to_lower_ascii("MiXeD 123"), "mixed 123");
}

TEST(Text, TokenizeKeepsUtf8Words) {
    const auto t = tokenize("Crème brûlée, 3.5 eggs!");
    ASSERT_EQ(t.size(), 5u);
    EXPECT_EQ(t[0], "crème");
    EXPECT_EQ(t[1], "brûlée");
    EXPECT_EQ(t[2], "3");
    EXPECT_EQ(t[3], "5");
    EXPECT_EQ(t[4], "eggs");
}

TEST(Text, NormalizeCollapsesPunctuationAndCase) {
    EXPECT_EQ(normalize("What  is, COAGULOPATHY?"), "what is coagulopathy");
    EXPECT_EQ(normalize(""), "");
}

TEST(Text, ContentTermsDropStopwordsAndSingleLetters) {
    const auto t = content_terms("what is a sourdough starter");
    EXPECT_EQ(t, (std::vector<std::string>{"sourdough", "starter"}));
}

TEST(Text, JaccardBounds) {
    EXPECT_DOUBLE_EQ(token_jaccard("", ""), 1.0);
    EXPECT_DOUBLE_EQ(token_jaccard("a b", "A, b!"), 1.0);
    EXPECT_DOUBLE_EQ(token_jaccard("a b", "c d"), 0.0);
    EXPECT_DOUBLE_EQ(token_jaccard("a b c", "a b d"), 0.5);
}

TEST(Text, CountWords) {
    EXPECT_EQ(count_words(""), 0u);
    EXPECT_EQ(count_words("  one\ttwo\nthree  "), 3u);
}

TEST(Text, LongestCommonSubstringIsCaseInsensitive) {
    const auto m = longest_common_substring("The Quick brown fox", "quick BROWN");
    EXPECT_EQ(m.length, 11u);
    EXPECT_EQ(m.haystack_offset, 4u);
}

// Brute-force oracle over all substring pairs.
static std::size_t lcs_oracle(const std::string& a, const std::string& b) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            std::size_t k = 0;
            while (i + k < a.size() && j + k < b.size() &&
                   std::tolower(static_cast<unsigned char>(a[i + k])) ==
                       std::tolower(static_cast<unsigned char>(b[j + k]))) {
                ++k;
            }
            best = std::max(best, k);
        }
    }
    return best;
}

TEST(Text, LongestCommonSubstringMatchesOracle) {
    std::mt19937_64 rng(7);
    const std::string alphabet = "abAB c";
    for (int trial = 0; trial < 300; ++trial) {
        std::string a, b;
        for (int i = 0, n = static_cast<int>(rng() % 20); i < n; ++i) a += alphabet[rng() % alphabet.size()];
        for (int i = 0, n = static_cast<int>(rng() % 12); i < n; ++i) b += alphabet[rng() % alphabet.size()];
        const auto m = longest_common_substring(a, b);
        ASSERT_EQ(m.length, lcs_oracle(a, b)) << a << " | " << b;
        if (m.length > 0) {
            const auto piece = to_lower_ascii(a.substr(m.haystack_offset, m.length));
            ASSERT_NE(to_lower_ascii(b).find(piece), std::string::npos);
        }
    }
}

TEST(Text, LocateExcerptExactAndParaphrased) {
    const std::string body = "Intro line.\nCoagulopathies are sometimes mistakenly referred to as clotting disorders.";
    const auto exact = locate_excerpt(body, "Coagulopathies are sometimes mistakenly referred");
    EXPECT_TRUE(exact.locatable);
    EXPECT_DOUBLE_EQ(exact.similarity, 1.0);
    EXPECT_EQ(body.substr(exact.offset, exact.length), "Coagulopathies are sometimes mistakenly referred");

    const auto lost = locate_excerpt(body, "an entirely different sentence about gardening");
    EXPECT_FALSE(lost.locatable);
    EXPECT_LT(lost.similarity, kAnchorSimilarityFloor);
}

TEST(Text, ExcerptSimilarityIsSymmetric) {
    EXPECT_DOUBLE_EQ(excerpt_similarity("abc def", "abc"), 1.0);
    EXPECT_DOUBLE_EQ(excerpt_similarity("abc", "abc def"), 1.0);
    EXPECT_DOUBLE_EQ(excerpt_similarity("xyz", "abc"), 0.0);
}

TEST(Text, Hex) { EXPECT_EQ(to_hex(std::string("\x00\xff\x10", 3)), "00ff10"); }
