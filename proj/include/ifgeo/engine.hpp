#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ifgeo/llm/gateway.hpp"
#include "ifgeo/model.hpp"

namespace ifgeo::engine {

struct CandidateSet {
    std::string query;
    std::vector<Document> docs;
    std::optional<std::size_t> target_position;  // 0-based index into docs
};

/// Throws InvariantError on an empty set, repeated doc_ids or a bad target.
void validate(const CandidateSet& cs);

struct CitedSentence {
    std::string text;  // includes the whitespace that follows it
    std::size_t word_count = 0;
    std::set<std::size_t> cited;  // 1-based source numbers
};

struct CitationParse {
    std::vector<CitedSentence> sentences;
    std::size_t dropped = 0;  // out-of-range citation indices
};

/// Splits generated text into sentences and attributes bracketed citations.
///
/// A sentence ends at a run of '.', '!' or '?' (optionally followed by a
/// closing quote or parenthesis) when what comes next is end of text, or
/// whitespace and then an uppercase letter, a non-ASCII byte, a '[', or an
/// opening quote/parenthesis. "3.5" never splits. Citation groups directly
/// after the terminator ("rare. [2] Next") belong to the sentence they
/// follow. Groups are "[k]", "[k][j]" and "[k, j]"; indices outside 1..n are
/// dropped and counted. word_count ignores tokens that are nothing but
/// citation groups and punctuation. Sentences concatenate back to the text;
/// text without any non-whitespace yields no sentences.
CitationParse parse_citations(std::string_view text, std::size_t n);

struct EngineResponse {
    std::string query;
    std::string text;
    std::vector<CitedSentence> sentences;
    std::size_t source_count = 0;
    std::size_t dropped_citations = 0;
    std::vector<std::string> warnings;
};

/// Builds the response record for `text` answered over `source_count` sources.
EngineResponse make_response(std::string query, std::string text, std::size_t source_count);

/// Fixed-mode retrieval: the dataset's stored candidate sets, by query.
class FixedRetriever {
public:
    void add(CandidateSet cs);
    /// The stored set for `query`, verbatim. Throws UnknownQuery.
    const CandidateSet& retrieve(std::string_view query) const;
    bool contains(std::string_view query) const { return sets_.contains(std::string(query)); }

private:
    std::map<std::string, CandidateSet> sets_;
};

/// Lexical retrieval: score(d) = sum over distinct query terms t of
/// tf(t, d) * log(1 + |corpus| / df(t)); top n, ties by doc_id ascending.
/// Throws ConfigError when the corpus holds fewer than n documents.
CandidateSet retrieve_lexical(std::string_view query, const std::vector<Document>& corpus, std::size_t n,
                              std::optional<std::string> target_doc_id = std::nullopt);

/// Lexical score of one document, exposed for tests and diagnostics.
double lexical_score(std::string_view query, const Document& doc, const std::vector<Document>& corpus);

/// The simulated generative engine: one answer-synthesis call per
/// (query, candidate set), parsed with parse_citations.
class Engine {
public:
    explicit Engine(llm::Gateway& gateway, double temperature = 0.0);

    EngineResponse generate_response(std::string_view query, const CandidateSet& cs,
                                     llm::TokenMeter* meter = nullptr);

private:
    llm::Gateway& gateway_;
    double temperature_;
};

}  // namespace ifgeo::engine
