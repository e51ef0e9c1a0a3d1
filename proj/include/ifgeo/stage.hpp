#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace ifgeo {

/// Every kind of LLM call the workbench issues. The stage decides which
/// output schema a completion is validated against.
enum class Stage : std::size_t {
    mining,
    request_gen,
    dedup,
    conflict,
    blueprint,
    revise,
    judge,
    heuristic,
    engine,
};

inline constexpr std::size_t kStageCount = 9;

inline constexpr std::array<Stage, kStageCount> kAllStages{
    Stage::mining,  Stage::request_gen, Stage::dedup,     Stage::conflict, Stage::blueprint,
    Stage::revise,  Stage::judge,       Stage::heuristic, Stage::engine,
};

/// The six stages that make up one optimization run.
inline constexpr std::array<Stage, 6> kPipelineStages{
    Stage::mining, Stage::request_gen, Stage::dedup, Stage::conflict, Stage::blueprint, Stage::revise,
};

constexpr std::string_view stage_name(Stage s) {
    switch (s) {
        case Stage::mining: return "mining";
        case Stage::request_gen: return "request_gen";
        case Stage::dedup: return "dedup";
        case Stage::conflict: return "conflict";
        case Stage::blueprint: return "blueprint";
        case Stage::revise: return "revise";
        case Stage::judge: return "judge";
        case Stage::heuristic: return "heuristic";
        case Stage::engine: return "engine";
    }
    return "unknown";
}

constexpr std::optional<Stage> stage_from_name(std::string_view name) {
    for (auto s : kAllStages) {
        if (stage_name(s) == name) return s;
    }
    return std::nullopt;
}

constexpr std::size_t stage_slot(Stage s) { return static_cast<std::size_t>(s); }

}  // namespace ifgeo
