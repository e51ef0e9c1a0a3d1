#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ifgeo/stage.hpp"
#include "ifgeo/text.hpp"

namespace ifgeo {

struct Document {
    std::string doc_id;
    std::string body;                // UTF-8 markdown
    std::optional<int> origin_rank;  // 1..5, initial retrieval rank
};

/// Throws InvariantError when the body is empty or the rank is out of range.
void validate(const Document& doc);

/// A flat section of a markdown body. `heading` is empty for the preamble.
struct Section {
    std::optional<std::string> heading;
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive

    bool is_preamble() const noexcept { return !heading.has_value(); }
    std::string name() const { return heading.value_or(std::string(kPreambleName)); }
    std::string_view slice(std::string_view body) const { return body.substr(begin, end - begin); }

    static constexpr std::string_view kPreambleName = "(preamble)";
};

struct SectionIndex {
    std::vector<Section> sections;

    /// Section whose span contains `offset`; offsets at or past the end map
    /// to the last section.
    std::size_t section_at(std::size_t offset) const;

    /// Resolves a blueprint section name: exact heading, then normalized
    /// heading, then the preamble aliases ("introduction", "intro", ...).
    std::optional<std::size_t> find_by_name(std::string_view name) const;
};

/// Splits a body at ATX headings (1-6 '#' followed by a space). Text ahead of
/// the first heading becomes the preamble; lines inside fenced code blocks
/// never open a section. Spans tile the body exactly.
SectionIndex index_sections(std::string_view body);

struct WeightedQuery {
    std::string text;
    int weight = 0;  // 0..100 popularity estimate
};

struct QuerySet {
    std::string doc_id;
    std::vector<WeightedQuery> entries;

    std::size_t size() const noexcept { return entries.size(); }
};

/// (w/100)(s/100): the global priority on the [0,1] scale the filter uses.
constexpr double global_priority(int weight, int necessity) {
    return (static_cast<double>(weight) / 100.0) * (static_cast<double>(necessity) / 100.0);
}

struct EditRequest {
    std::size_t query_index = 0;
    std::size_t request_index = 0;
    std::string excerpt;
    std::string suggestion;
    int necessity = 0;
    double global_priority = 0.0;
    text::AnchorMatch anchor;
};

struct RequestRef {
    std::size_t query_index = 0;
    std::size_t request_index = 0;

    auto operator<=>(const RequestRef&) const = default;
};

enum class Resolution { kept, merged, selected, synthesized };

std::string_view resolution_name(Resolution r);
std::optional<Resolution> resolution_from_name(std::string_view name);

struct FusedInstruction {
    std::string id;
    std::string topic;
    std::string excerpt;
    std::string suggestion;
    int necessity = 0;
    double priority = 0.0;  // highest global priority among constituents
    std::vector<RequestRef> provenance;
    Resolution resolution = Resolution::kept;
};

/// Coarse direction of a suggestion, from its verbs. Two suggestions on the
/// same excerpt conflict when one reduces and the other expands.
enum class EditIntent { neutral, reduce, expand };

EditIntent classify_intent(std::string_view suggestion);
bool intents_conflict(EditIntent a, EditIntent b);

struct BlueprintItem {
    std::string section_name;
    std::string target_location;
    std::string modification_intent;
    std::vector<std::string> directives;
    std::string format_note;

    // Filled by validation: resolved section (absent for a new insertion
    // point) and the instruction ids this item's directives cover.
    std::optional<std::size_t> resolved_section;
    std::vector<std::string> instruction_ids;
};

struct Blueprint {
    std::vector<BlueprintItem> items;

    bool empty() const noexcept { return items.empty(); }
};

enum class Ablation { no_blueprint, no_fusion, no_conflict_res };

std::string_view ablation_name(Ablation a);
std::optional<Ablation> ablation_from_name(std::string_view name);

struct PipelineConfig {
    int n_queries = 5;
    int n_suggestions = 5;
    double tau = 0.7;
    double temperature = 0.2;
    std::set<Ablation> ablation;
    bool strict_preservation = false;

    bool has(Ablation a) const { return ablation.contains(a); }
};

/// Throws ConfigError on out-of-range values.
void validate(const PipelineConfig& cfg);

struct StageTokens {
    std::int64_t prompt = 0;
    std::int64_t completion = 0;

    std::int64_t total() const noexcept { return prompt + completion; }
};

struct RunManifest {
    PipelineConfig config;
    std::string backend_id;
    std::uint64_t seed = 0;
    std::array<StageTokens, kStageCount> stage_tokens{};
    std::string started_at;
    std::string finished_at;
    std::vector<std::string> artifact_paths;
    std::vector<std::string> warnings;
    std::vector<std::string> preservation_violations;
    double survival_rate = 0.0;  // filtered pool size / raw pool size
    std::size_t cache_hits = 0;

    std::int64_t total_tokens() const noexcept;
    const StageTokens& tokens(Stage s) const { return stage_tokens[stage_slot(s)]; }
};

/// ISO-8601 UTC timestamp with second resolution.
std::string utc_timestamp();

}  // namespace ifgeo
