#include "ifgeo/engine.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "ifgeo/errors.hpp"
#include "ifgeo/prompts.hpp"
#include "ifgeo/text.hpp"

namespace ifgeo::engine {

void validate(const CandidateSet& cs) {
    if (cs.docs.empty()) throw InvariantError("candidate set for '" + cs.query + "' is empty");
    std::unordered_set<std::string> ids;
    for (const auto& d : cs.docs) {
        if (!ids.insert(d.doc_id).second) {
            throw InvariantError("candidate set for '" + cs.query + "' repeats doc_id '" + d.doc_id + "'");
        }
    }
    if (cs.target_position && *cs.target_position >= cs.docs.size()) {
        throw InvariantError("target position " + std::to_string(*cs.target_position) + " outside candidate set");
    }
}

// ---- citation parsing ----------------------------------------------------

namespace {

struct Group {
    std::size_t end = 0;  // one past ']'
    std::vector<std::size_t> indices;
};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

/// "[k]" or "[k, j, ...]" starting at `i`.
std::optional<Group> citation_at(std::string_view s, std::size_t i) {
    if (i >= s.size() || s[i] != '[') return std::nullopt;
    Group g;
    std::size_t p = i + 1;
    auto skip_spaces = [&] {
        while (p < s.size() && (s[p] == ' ' || s[p] == '\t')) ++p;
    };
    while (true) {
        skip_spaces();
        const std::size_t start = p;
        std::size_t value = 0;
        while (p < s.size() && is_digit(s[p]) && p - start < 9) value = value * 10 + static_cast<std::size_t>(s[p++] - '0');
        if (p == start || (p < s.size() && is_digit(s[p]))) return std::nullopt;
        g.indices.push_back(value);
        skip_spaces();
        if (p < s.size() && s[p] == ',') {
            ++p;
            continue;
        }
        if (p < s.size() && s[p] == ']') {
            g.end = p + 1;
            return g;
        }
        return std::nullopt;
    }
}

std::size_t skip_ws(std::string_view s, std::size_t p) {
    while (p < s.size() && is_space(s[p])) ++p;
    return p;
}

bool starts_sentence(std::string_view s, std::size_t q) {
    const auto c = static_cast<unsigned char>(s[q]);
    if ((c >= 'A' && c <= 'Z') || c >= 0x80 || c == '[') return true;
    if ((c == '"' || c == '\'' || c == '(') && q + 1 < s.size()) {
        const auto d = static_cast<unsigned char>(s[q + 1]);
        return (d >= 'A' && d <= 'Z') || d >= 0x80;
    }
    return false;
}

/// Position where the next sentence starts if a boundary sits at `p`.
std::optional<std::size_t> boundary_after(std::string_view s, std::size_t p) {
    if (p == s.size()) return p;
    if (!is_space(s[p])) return std::nullopt;
    const auto q = skip_ws(s, p);
    if (q == s.size() || starts_sentence(s, q)) return q;
    return std::nullopt;
}

}  // namespace

CitationParse parse_citations(std::string_view text, std::size_t n) {
    CitationParse out;
    if (text::trim(text).empty()) return out;

    std::vector<std::size_t> starts{0};
    std::size_t i = 0;
    while (i < text.size()) {
        if (auto g = citation_at(text, i)) {
            i = g->end;
            continue;
        }
        if (!is_terminator(text[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && is_terminator(text[j])) ++j;
        while (j < text.size() && (text[j] == '"' || text[j] == '\'' || text[j] == ')')) ++j;

        // A citation chain right after the terminator.
        std::optional<std::size_t> next;
        std::size_t m = skip_ws(text, j);
        std::optional<std::size_t> chain_end;
        while (auto g = citation_at(text, m)) {
            chain_end = g->end;
            m = skip_ws(text, g->end);
        }
        if (chain_end) next = boundary_after(text, *chain_end);
        if (!next) next = boundary_after(text, j);
        if (next) {
            if (*next < text.size()) starts.push_back(*next);
            i = *next;
            continue;
        }
        i = j;
    }

    for (std::size_t k = 0; k < starts.size(); ++k) {
        const auto b = starts[k];
        const auto e = k + 1 < starts.size() ? starts[k + 1] : text.size();
        CitedSentence sent;
        sent.text = std::string(text.substr(b, e - b));

        // Citations, with each group replaced by a marker byte for counting.
        std::string masked;
        for (std::size_t p = 0; p < sent.text.size();) {
            if (auto g = citation_at(sent.text, p)) {
                for (auto idx : g->indices) {
                    if (idx >= 1 && idx <= n) {
                        sent.cited.insert(idx);
                    } else {
                        ++out.dropped;
                    }
                }
                masked.push_back('\x01');
                p = g->end;
            } else {
                masked.push_back(sent.text[p++]);
            }
        }
        std::size_t p = 0;
        while (p < masked.size()) {
            p = skip_ws(masked, p);
            if (p >= masked.size()) break;
            bool marker = false, wordish = false;
            while (p < masked.size() && !is_space(masked[p])) {
                const auto c = static_cast<unsigned char>(masked[p]);
                if (c == 0x01) {
                    marker = true;
                } else if (std::isalnum(c) || c >= 0x80 || !std::ispunct(c)) {
                    wordish = true;
                }
                ++p;
            }
            if (!marker || wordish) ++sent.word_count;
        }
        out.sentences.push_back(std::move(sent));
    }
    return out;
}

EngineResponse make_response(std::string query, std::string text, std::size_t source_count) {
    EngineResponse r;
    r.query = std::move(query);
    r.text = std::move(text);
    r.source_count = source_count;
    auto parsed = parse_citations(r.text, std::max<std::size_t>(source_count, 1));
    r.sentences = std::move(parsed.sentences);
    r.dropped_citations = parsed.dropped;
    if (parsed.dropped) {
        r.warnings.push_back("dropped " + std::to_string(parsed.dropped) + " out-of-range citation index(es)");
    }
    const bool any_cited = std::any_of(r.sentences.begin(), r.sentences.end(),
                                       [](const CitedSentence& s) { return !s.cited.empty(); });
    if (!any_cited) r.warnings.push_back("UncitedResponse: no sentence carries a citation");
    return r;
}

// ---- retrieval -----------------------------------------------------------

void FixedRetriever::add(CandidateSet cs) {
    validate(cs);
    auto key = cs.query;
    sets_.insert_or_assign(std::move(key), std::move(cs));
}

const CandidateSet& FixedRetriever::retrieve(std::string_view query) const {
    auto it = sets_.find(std::string(query));
    if (it == sets_.end()) throw UnknownQuery("no stored candidates for query '" + std::string(query) + "'");
    return it->second;
}

namespace {

std::vector<std::string> distinct_terms(std::string_view query) {
    std::vector<std::string> terms;
    for (auto& t : text::content_terms(query)) {
        if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(std::move(t));
    }
    return terms;
}

struct CorpusStats {
    std::vector<std::unordered_map<std::string, std::size_t>> tf;
    std::unordered_map<std::string, std::size_t> df;
};

CorpusStats corpus_stats(const std::vector<Document>& corpus) {
    CorpusStats st;
    for (const auto& d : corpus) {
        auto& counts = st.tf.emplace_back();
        for (auto& t : text::tokenize(d.body)) ++counts[t];
        for (const auto& [t, c] : counts) ++st.df[t];
    }
    return st;
}

double score_with(const std::vector<std::string>& terms, const std::unordered_map<std::string, std::size_t>& tf,
                  const CorpusStats& st, std::size_t corpus_size) {
    double score = 0.0;
    for (const auto& t : terms) {
        auto it = tf.find(t);
        if (it == tf.end()) continue;
        const auto df = st.df.at(t);
        score += static_cast<double>(it->second) *
                 std::log(1.0 + static_cast<double>(corpus_size) / static_cast<double>(df));
    }
    return score;
}

}  // namespace

double lexical_score(std::string_view query, const Document& doc, const std::vector<Document>& corpus) {
    const auto st = corpus_stats(corpus);
    std::unordered_map<std::string, std::size_t> tf;
    for (auto& t : text::tokenize(doc.body)) ++tf[t];
    return score_with(distinct_terms(query), tf, st, corpus.size());
}

CandidateSet retrieve_lexical(std::string_view query, const std::vector<Document>& corpus, std::size_t n,
                              std::optional<std::string> target_doc_id) {
    if (corpus.size() < n) {
        throw ConfigError("corpus of " + std::to_string(corpus.size()) + " documents is smaller than n=" +
                          std::to_string(n));
    }
    const auto st = corpus_stats(corpus);
    const auto terms = distinct_terms(query);
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < corpus.size(); ++i) scored.push_back({score_with(terms, st.tf[i], st, corpus.size()), i});
    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return corpus[a.second].doc_id < corpus[b.second].doc_id;
    });
    CandidateSet cs;
    cs.query = std::string(query);
    for (std::size_t k = 0; k < n; ++k) {
        const auto& d = corpus[scored[k].second];
        if (target_doc_id && d.doc_id == *target_doc_id) cs.target_position = k;
        cs.docs.push_back(d);
    }
    return cs;
}

// ---- generation ----------------------------------------------------------

Engine::Engine(llm::Gateway& gateway, double temperature) : gateway_(gateway), temperature_(temperature) {}

EngineResponse Engine::generate_response(std::string_view query, const CandidateSet& cs, llm::TokenMeter* meter) {
    validate(cs);
    const auto result = gateway_.complete_structured(prompts::answer_synthesis(query, cs.docs, temperature_), meter);
    auto r = make_response(std::string(query), result.value.get<std::string>(), cs.docs.size());
    r.warnings.insert(r.warnings.begin(), result.warnings.begin(), result.warnings.end());
    return r;
}

}  // namespace ifgeo::engine
