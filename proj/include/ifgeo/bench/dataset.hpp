#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ifgeo/engine.hpp"
#include "ifgeo/llm/gateway.hpp"
#include "ifgeo/model.hpp"
#include "json.hpp"

namespace ifgeo::bench {

inline constexpr std::size_t kDefaultClusterSize = 5;

/// One benchmark line: a document, its query cluster, and the candidate
/// pool(s) it competes in.
///
///   {"doc_id", "document", "origin_rank"?, "queries": [K strings],
///    "candidates": [{"doc_id", "document"}...], "target_position",
///    "candidates_by_query"?: [[{"doc_id", "document"}...] per query]}
///
/// The shared pool is used for every query unless candidates_by_query is
/// present; in a per-query pool the target is found by doc_id. Unknown
/// keys are carried through `extra` so records round-trip.
struct BenchRecord {
    std::string doc_id;
    Document document;
    std::vector<std::string> queries;
    std::vector<Document> candidates;
    std::size_t target_position = 0;
    std::optional<std::vector<std::vector<Document>>> candidates_by_query;
    nlohmann::json extra = nlohmann::json::object();

    /// Candidate set of query `qi` with the target at its position.
    engine::CandidateSet candidate_set(std::size_t qi) const;

    /// The same set with the target's body replaced by `revised`.
    engine::CandidateSet candidate_set(std::size_t qi, const Document& revised) const;
};

/// Throws InvariantError.
BenchRecord record_from_json(const nlohmann::json& j, std::size_t cluster_size = kDefaultClusterSize);
nlohmann::json record_to_json(const BenchRecord& r);

struct LoadResult {
    std::vector<BenchRecord> records;
    std::size_t skipped = 0;
    std::vector<std::string> skip_reasons;  // "line N: reason"
};

/// JSONL reader. Blank lines are ignored; a line that is not JSON throws
/// FormatError with its 1-based number; a record that breaks an invariant
/// (including a repeated doc_id) is skipped and counted.
LoadResult parse_dataset(std::string_view contents, std::size_t cluster_size = kDefaultClusterSize);
LoadResult load_dataset(const std::filesystem::path& path, std::size_t cluster_size = kDefaultClusterSize);

std::string serialize_dataset(const std::vector<BenchRecord>& records);

/// Indices of a seeded uniform sample of `k` of `n` records, ascending.
/// k == 0 or k >= n selects everything.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed);

inline constexpr std::array<std::string_view, 9> kHeuristics{
    "traditional_seo", "unique_words",  "simple_expression",  "authoritative",        "fluent",
    "technical_terms", "cite_sources",  "quotation_addition", "statistics_addition",
};

bool is_heuristic(std::string_view name);

/// Single-pass rewrite with one strategy template; the reply replaces the
/// body wholesale. Unknown strategies throw ConfigError before any call.
Document apply_heuristic(llm::Gateway& gateway, const Document& doc, std::string_view strategy,
                         double temperature = 0.2, llm::TokenMeter* meter = nullptr);

}  // namespace ifgeo::bench
