#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "citation_fixtures.hpp"
#include "ifgeo/engine.hpp"
#include "ifgeo/errors.hpp"
#include "support.hpp"

using namespace ifgeo;
using namespace ifgeo::engine;

TEST(Citations, GoldenFixtures) {
    const auto& fixtures = ifgeo::testing::citation_fixtures();
    ASSERT_GE(fixtures.size(), 30u);
    for (const auto& f : fixtures) {
        SCOPED_TRACE(f.name);
        const auto p = parse_citations(f.input, f.n);
        ASSERT_EQ(p.sentences.size(), f.sentences.size());
        for (std::size_t i = 0; i < f.sentences.size(); ++i) {
            EXPECT_EQ(p.sentences[i].text, f.sentences[i].text) << i;
            EXPECT_EQ(p.sentences[i].word_count, f.sentences[i].words) << i;
            EXPECT_EQ(p.sentences[i].cited, f.sentences[i].cited) << i;
        }
        EXPECT_EQ(p.dropped, f.dropped);
    }
}

namespace {

bool is_marker_token(const std::string& tok) {
    // Only citation groups and punctuation.
    std::string rest;
    for (std::size_t i = 0; i < tok.size();) {
        if (tok[i] == '[') {
            const auto close = tok.find(']', i);
            if (close != std::string::npos) {
                const auto inner = tok.substr(i + 1, close - i - 1);
                const bool group = !inner.empty() && std::all_of(inner.begin(), inner.end(), [](char c) {
                    return std::isdigit(static_cast<unsigned char>(c)) || c == ',' || c == ' ';
                }) && std::any_of(inner.begin(), inner.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
                if (group) {
                    i = close + 1;
                    continue;
                }
            }
            return false;
        }
        if (!std::ispunct(static_cast<unsigned char>(tok[i]))) return false;
        ++i;
    }
    return tok.find('[') != std::string::npos;
}

}  // namespace

// Random answers built from words, numbers, groups and terminators.
TEST(Citations, TotalAndWordCountConserved) {
    std::mt19937_64 rng(21);
    const std::vector<std::string> words{"alpha", "Beta", "3.5", "[1]", "[2][3]", "[1, 4]", "gamma.", "Delta!",
                                         "x?", "[9]", "(aside)", "\"Quote\"", "é", "[note]"};
    for (int trial = 0; trial < 2000; ++trial) {
        std::string text;
        std::size_t expect_words = 0;
        for (int i = 0, n = static_cast<int>(rng() % 15); i < n; ++i) {
            const auto& w = words[rng() % words.size()];
            text += w;
            text += (rng() % 4 == 0) ? "\n" : " ";
            if (!is_marker_token(w)) ++expect_words;
        }
        const auto p = parse_citations(text, 3);
        std::string joined;
        std::size_t total = 0;
        for (const auto& s : p.sentences) {
            joined += s.text;
            total += s.word_count;
            for (auto c : s.cited) ASSERT_TRUE(c >= 1 && c <= 3);
        }
        if (text::trim(text).empty()) {
            ASSERT_TRUE(p.sentences.empty());
        } else {
            ASSERT_EQ(joined, text);
        }
        ASSERT_EQ(total, expect_words) << text;
        const auto again = parse_citations(text, 3);
        ASSERT_EQ(again.sentences.size(), p.sentences.size());
    }
}

TEST(Response, WarnsWhenNothingIsCited) {
    const auto r = make_response("q", "Plain text only.", 3);
    ASSERT_FALSE(r.warnings.empty());
    EXPECT_NE(r.warnings.back().find("UncitedResponse"), std::string::npos);
    const auto d = make_response("q", "Bad [5]. Good [1].", 2);
    EXPECT_EQ(d.dropped_citations, 1u);
    EXPECT_EQ(d.sentences.size(), 2u);
}

// ---- retrieval -----------------------------------------------------------

namespace {

std::vector<Document> corpus() {
    return {{"d1", "sourdough starter feeding schedule and sourdough hydration", std::nullopt},
            {"d2", "compost bins and garden soil", std::nullopt},
            {"d3", "a starter guide to bread", std::nullopt},
            {"d4", "garden tools", std::nullopt},
            {"d5", "garden tools", std::nullopt},
            {"d6", "unrelated text about trains", std::nullopt}};
}

}  // namespace

TEST(Lexical, MatchingDocumentRanksFirst) {
    const auto c = corpus();
    const auto cs = retrieve_lexical("sourdough starter", c, 3, "d3");
    ASSERT_EQ(cs.docs.size(), 3u);
    EXPECT_EQ(cs.docs[0].doc_id, "d1");
    EXPECT_EQ(cs.docs[1].doc_id, "d3");
    EXPECT_EQ(cs.target_position, 1u);
    // Oracle: tf * log(1 + N/df) by hand for d1.
    const double expect = 2 * std::log(1.0 + 6.0 / 1.0) + 1 * std::log(1.0 + 6.0 / 2.0);
    EXPECT_NEAR(lexical_score("sourdough starter", c[0], c), expect, 1e-12);
}

TEST(Lexical, TiesBreakByDocId) {
    auto c = corpus();
    const auto cs = retrieve_lexical("tools", c, 2);
    EXPECT_EQ(cs.docs[0].doc_id, "d4");
    EXPECT_EQ(cs.docs[1].doc_id, "d5");
    EXPECT_FALSE(cs.target_position.has_value());
    EXPECT_THROW(retrieve_lexical("x", c, 7), ConfigError);
}

TEST(Lexical, PermutationInvariant) {
    auto c = corpus();
    const auto base = retrieve_lexical("garden soil starter", c, 4);
    std::mt19937_64 rng(9);
    for (int i = 0; i < 50; ++i) {
        std::shuffle(c.begin(), c.end(), rng);
        const auto cs = retrieve_lexical("garden soil starter", c, 4);
        for (std::size_t k = 0; k < 4; ++k) ASSERT_EQ(cs.docs[k].doc_id, base.docs[k].doc_id);
    }
}

TEST(Fixed, ReturnsStoredSetVerbatim) {
    FixedRetriever r;
    CandidateSet cs{"q", {{"a", "x", std::nullopt}, {"b", "y", std::nullopt}}, 1};
    r.add(cs);
    EXPECT_TRUE(r.contains("q"));
    EXPECT_EQ(r.retrieve("q").docs[1].doc_id, "b");
    EXPECT_EQ(r.retrieve("q").target_position, 1u);
    EXPECT_THROW(r.retrieve("other"), UnknownQuery);
    EXPECT_THROW(r.add({"z", {}, std::nullopt}), InvariantError);
    EXPECT_THROW(r.add({"z", {{"a", "x", std::nullopt}, {"a", "y", std::nullopt}}, std::nullopt}), InvariantError);
    EXPECT_THROW(r.add({"z", {{"a", "x", std::nullopt}}, 3}), InvariantError);
}

// ---- generation on the mock ---------------------------------------------

TEST(Engine, MockCitesInCandidateOrder) {
    llm::Gateway gw(std::make_shared<llm::MockBackend>(), ifgeo::testing::fast_options());
    Engine e(gw);
    CandidateSet cs{"garden soil", {}, std::nullopt};
    for (const auto& d : corpus()) cs.docs.push_back(d);
    const auto r = e.generate_response("garden soil", cs);
    ASSERT_EQ(r.sentences.size(), cs.docs.size());
    for (std::size_t k = 0; k < r.sentences.size(); ++k) {
        EXPECT_EQ(r.sentences[k].cited, (std::set<std::size_t>{k + 1}));
    }
    // Overlap with the question lengthens the sentence.
    EXPECT_GT(r.sentences[1].word_count, r.sentences[5].word_count);

    const auto single = e.generate_response("garden soil", {"garden soil", {cs.docs[0]}, std::nullopt});
    for (const auto& s : single.sentences) {
        for (auto c : s.cited) EXPECT_EQ(c, 1u);
    }
}

TEST(Engine, CachedReplayIsIdentical) {
    llm::Gateway gw(std::make_shared<llm::MockBackend>(), ifgeo::testing::fast_options());
    Engine e(gw);
    const CandidateSet cs{"q", {{"a", "alpha text", std::nullopt}, {"b", "beta text", std::nullopt}}, 0};
    const auto a = e.generate_response("alpha", cs);
    const auto b = e.generate_response("alpha", cs);
    EXPECT_EQ(a.text, b.text);
    EXPECT_EQ(gw.stats().cache_hits, 1u);
}
