#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "ifgeo/stage.hpp"
#include "json.hpp"

namespace ifgeo::llm {

struct StructuredPayload {
    nlohmann::json value;
    std::vector<std::string> warnings;
};

/// Removes one surrounding ``` / ```lang fence if present; unfenced text is
/// returned untouched, whitespace included.
std::string strip_code_fences(std::string_view raw);

/// Scans for the first balanced top-level {...} or [...] that parses as JSON.
/// Throws ParseError when there is none.
nlohmann::json find_first_json(std::string_view raw);

/// Parses and validates a completion for `stage`.
///
/// JSON stages use the field names of their prompt templates verbatim:
///   mining      {"queries": [{"query", "probability"}]}
///   request_gen {"suggestions": [{"excerpt", "suggestion", "necessity"}]}
///   dedup       [{"id", "topic", "excerpt", "suggestion", "necessity"}]
///   conflict    [{"id", "excerpt", "suggestion"}]   necessity optional
///   blueprint   {"revision_blueprint": [{"section_name", "target_location",
///                "modification_intent", "directives", "format_note"}]}
///   judge       {"relevance", ..., "count"} integers
/// Scores are clamped into range (0-100, or 1-5 for the judge) with a
/// warning. Text stages (revise, heuristic, engine) return the unfenced
/// text as a JSON string.
///
/// Throws ParseError or SchemaError (carrying the offending path).
StructuredPayload extract_structured(std::string_view raw, Stage stage);

/// The seven judge dimensions, in report column order.
inline constexpr std::array<std::string_view, 7> kJudgeDimensions{
    "relevance", "influence", "uniqueness", "diversity", "followup", "position", "count",
};

}  // namespace ifgeo::llm
