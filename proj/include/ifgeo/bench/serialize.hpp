#pragma once

#include <filesystem>

#include "ifgeo/engine.hpp"
#include "ifgeo/model.hpp"
#include "ifgeo/pipeline.hpp"
#include "ifgeo/stability.hpp"
#include "json.hpp"

// JSON codecs for everything a run directory holds. The free functions are
// found by nlohmann::json through argument-dependent lookup.

namespace ifgeo {

void to_json(nlohmann::json& j, const Document& d);
void from_json(const nlohmann::json& j, Document& d);
void to_json(nlohmann::json& j, const WeightedQuery& q);
void from_json(const nlohmann::json& j, WeightedQuery& q);
void to_json(nlohmann::json& j, const QuerySet& qs);
void from_json(const nlohmann::json& j, QuerySet& qs);
void to_json(nlohmann::json& j, const EditRequest& r);
void from_json(const nlohmann::json& j, EditRequest& r);
void to_json(nlohmann::json& j, const FusedInstruction& f);
void from_json(const nlohmann::json& j, FusedInstruction& f);
void to_json(nlohmann::json& j, const BlueprintItem& item);
void from_json(const nlohmann::json& j, BlueprintItem& item);
void to_json(nlohmann::json& j, const Blueprint& bp);
void from_json(const nlohmann::json& j, Blueprint& bp);
void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);
void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);
void to_json(nlohmann::json& j, const PipelineArtifacts& a);

nlohmann::json stage_tokens_json(const std::array<StageTokens, kStageCount>& tokens);

}  // namespace ifgeo

namespace ifgeo::stability {

void to_json(nlohmann::json& j, const GainVector& g);
void from_json(const nlohmann::json& j, GainVector& g);
void to_json(nlohmann::json& j, const StabilityReport& r);
void from_json(const nlohmann::json& j, StabilityReport& r);
void to_json(nlohmann::json& j, const PopulationStats& s);
void from_json(const nlohmann::json& j, PopulationStats& s);
void to_json(nlohmann::json& j, const CompetitionReport& r);
void from_json(const nlohmann::json& j, CompetitionReport& r);

}  // namespace ifgeo::stability

namespace ifgeo::engine {

void to_json(nlohmann::json& j, const EngineResponse& r);

}  // namespace ifgeo::engine

namespace ifgeo::bench {

/// Pretty-printed JSON, written to a temp file and renamed into place.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
/// Throws MissingArtifact when the file is absent or unreadable.
nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace ifgeo::bench
