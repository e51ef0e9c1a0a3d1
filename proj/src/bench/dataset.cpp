#include "ifgeo/bench/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <unordered_set>

#include "ifgeo/errors.hpp"
#include "ifgeo/prompts.hpp"

namespace ifgeo::bench {

using nlohmann::json;

namespace {

const std::unordered_set<std::string> kKnownKeys{
    "doc_id", "document", "origin_rank", "queries", "candidates", "target_position", "candidates_by_query",
};

std::string require_string(const json& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw InvariantError(where + ": '" + key + "' must be a string");
    return it->get<std::string>();
}

std::vector<Document> candidates_from_json(const json& arr, const std::string& where) {
    if (!arr.is_array()) throw InvariantError(where + " must be an array");
    std::vector<Document> out;
    std::unordered_set<std::string> ids;
    for (std::size_t k = 0; k < arr.size(); ++k) {
        const auto w = where + "[" + std::to_string(k) + "]";
        if (!arr[k].is_object()) throw InvariantError(w + " must be an object");
        Document d{require_string(arr[k], "doc_id", w), require_string(arr[k], "document", w), std::nullopt};
        validate(d);
        if (!ids.insert(d.doc_id).second) throw InvariantError(w + " repeats doc_id '" + d.doc_id + "'");
        out.push_back(std::move(d));
    }
    if (out.empty()) throw InvariantError(where + " is empty");
    return out;
}

json candidates_to_json(const std::vector<Document>& docs) {
    json arr = json::array();
    for (const auto& d : docs) arr.push_back({{"doc_id", d.doc_id}, {"document", d.body}});
    return arr;
}

std::size_t position_of(const std::vector<Document>& docs, const std::string& doc_id) {
    for (std::size_t k = 0; k < docs.size(); ++k) {
        if (docs[k].doc_id == doc_id) return k;
    }
    throw InvariantError("target '" + doc_id + "' missing from a candidate set");
}

}  // namespace

BenchRecord record_from_json(const json& j, std::size_t cluster_size) {
    if (!j.is_object()) throw InvariantError("record must be a JSON object");
    BenchRecord r;
    r.doc_id = require_string(j, "doc_id", "record");
    const auto where = "record '" + r.doc_id + "'";
    r.document = {r.doc_id, require_string(j, "document", where), std::nullopt};
    if (auto it = j.find("origin_rank"); it != j.end() && !it->is_null()) {
        if (!it->is_number_integer()) throw InvariantError(where + ": origin_rank must be an integer");
        r.document.origin_rank = it->get<int>();
    }
    validate(r.document);

    const auto qs = j.find("queries");
    if (qs == j.end() || !qs->is_array()) throw InvariantError(where + ": 'queries' must be an array");
    for (const auto& q : *qs) {
        if (!q.is_string() || text::trim(q.get<std::string>()).empty()) {
            throw InvariantError(where + ": queries must be non-empty strings");
        }
        r.queries.push_back(q.get<std::string>());
    }
    if (r.queries.size() != cluster_size) {
        throw InvariantError(where + ": expected " + std::to_string(cluster_size) + " queries, found " +
                             std::to_string(r.queries.size()));
    }

    const auto cands = j.find("candidates");
    if (cands == j.end()) throw InvariantError(where + ": 'candidates' missing");
    r.candidates = candidates_from_json(*cands, where + ".candidates");
    const auto tp = j.find("target_position");
    if (tp == j.end() || !tp->is_number_integer() || tp->get<long long>() < 0) {
        throw InvariantError(where + ": 'target_position' must be a non-negative integer");
    }
    r.target_position = tp->get<std::size_t>();
    if (r.target_position >= r.candidates.size()) throw InvariantError(where + ": target_position out of range");
    if (r.candidates[r.target_position].doc_id != r.doc_id) {
        throw InvariantError(where + ": candidate at target_position is '" + r.candidates[r.target_position].doc_id +
                             "', not the record's document");
    }

    if (auto it = j.find("candidates_by_query"); it != j.end() && !it->is_null()) {
        if (!it->is_array() || it->size() != r.queries.size()) {
            throw InvariantError(where + ": 'candidates_by_query' needs one list per query");
        }
        std::vector<std::vector<Document>> per_query;
        for (std::size_t qi = 0; qi < it->size(); ++qi) {
            auto docs = candidates_from_json((*it)[qi], where + ".candidates_by_query[" + std::to_string(qi) + "]");
            position_of(docs, r.doc_id);
            per_query.push_back(std::move(docs));
        }
        r.candidates_by_query = std::move(per_query);
    }
    for (const auto& [k, v] : j.items()) {
        if (!kKnownKeys.contains(k)) r.extra[k] = v;
    }
    return r;
}

json record_to_json(const BenchRecord& r) {
    json j = r.extra.is_object() ? r.extra : json::object();
    j["doc_id"] = r.doc_id;
    j["document"] = r.document.body;
    if (r.document.origin_rank) j["origin_rank"] = *r.document.origin_rank;
    j["queries"] = r.queries;
    j["candidates"] = candidates_to_json(r.candidates);
    j["target_position"] = r.target_position;
    if (r.candidates_by_query) {
        json per = json::array();
        for (const auto& docs : *r.candidates_by_query) per.push_back(candidates_to_json(docs));
        j["candidates_by_query"] = std::move(per);
    }
    return j;
}

engine::CandidateSet BenchRecord::candidate_set(std::size_t qi) const {
    if (qi >= queries.size()) throw IndexError("query " + std::to_string(qi) + " outside record '" + doc_id + "'");
    engine::CandidateSet cs;
    cs.query = queries[qi];
    if (candidates_by_query) {
        cs.docs = (*candidates_by_query)[qi];
        cs.target_position = position_of(cs.docs, doc_id);
    } else {
        cs.docs = candidates;
        cs.target_position = target_position;
    }
    // The record's own text is authoritative for the target.
    cs.docs[*cs.target_position].body = document.body;
    return cs;
}

engine::CandidateSet BenchRecord::candidate_set(std::size_t qi, const Document& revised) const {
    auto cs = candidate_set(qi);
    cs.docs[*cs.target_position].body = revised.body;
    return cs;
}

LoadResult parse_dataset(std::string_view contents, std::size_t cluster_size) {
    LoadResult out;
    std::unordered_set<std::string> ids;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= contents.size()) {
        auto end = contents.find('\n', pos);
        if (end == std::string_view::npos) end = contents.size();
        const auto line = contents.substr(pos, end - pos);
        ++line_no;
        pos = end + 1;
        if (text::trim(line).empty()) {
            if (end == contents.size()) break;
            continue;
        }
        const auto j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw FormatError(line_no, "line is not valid JSON");
        try {
            auto rec = record_from_json(j, cluster_size);
            if (!ids.insert(rec.doc_id).second) throw InvariantError("doc_id '" + rec.doc_id + "' repeats");
            out.records.push_back(std::move(rec));
        } catch (const InvariantError& e) {
            ++out.skipped;
            out.skip_reasons.push_back("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (end == contents.size()) break;
    }
    return out;
}

LoadResult load_dataset(const std::filesystem::path& path, std::size_t cluster_size) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read dataset " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dataset(buf.str(), cluster_size);
}

std::string serialize_dataset(const std::vector<BenchRecord>& records) {
    std::string out;
    for (const auto& r : records) out += record_to_json(r).dump() + "\n";
    return out;
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (k == 0 || k >= n) return idx;
    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates; bounded draws by rejection so the selection does
    // not depend on the standard library's distribution code.
    auto below = [&](std::uint64_t bound) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t x;
        do {
            x = rng();
        } while (x >= limit);
        return x % bound;
    };
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

bool is_heuristic(std::string_view name) {
    return std::find(kHeuristics.begin(), kHeuristics.end(), name) != kHeuristics.end();
}

Document apply_heuristic(llm::Gateway& gateway, const Document& doc, std::string_view strategy, double temperature,
                         llm::TokenMeter* meter) {
    if (!is_heuristic(strategy)) throw ConfigError("unknown heuristic strategy '" + std::string(strategy) + "'");
    const auto result = gateway.complete_structured(prompts::heuristic(doc, strategy, temperature), meter);
    return {doc.doc_id, result.value.get<std::string>(), doc.origin_rank};
}

}  // namespace ifgeo::bench
