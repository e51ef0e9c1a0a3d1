#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace ifgeo::bench {

/// One row of the per-stage token table.
struct TokenRow {
    std::string stage;
    std::int64_t prompt = 0;
    std::int64_t completion = 0;
    std::int64_t total = 0;
    double mean_per_document = 0.0;
};

/// Token rows of one variant's aggregate. Pipeline runs report Query Mining,
/// Edit Request Generation, Instruction Fusion (dedup + conflict +
/// blueprint) and Blueprint-Guided Revision; heuristic runs report a single
/// rewrite row. The last row is always Total, the exact sum of the others.
std::vector<TokenRow> token_rows(const nlohmann::json& variant, bool heuristic);

/// Writes reports/{comparison,tokens}.{txt,json}, plus stratified.* when the
/// run used strata and competition.* for per-query tuning runs. Output is a
/// pure function of aggregate.json and manifest.json. Returns the written
/// paths. Throws MissingArtifact.
std::vector<std::filesystem::path> emit_reports(const std::filesystem::path& run_dir);

}  // namespace ifgeo::bench
