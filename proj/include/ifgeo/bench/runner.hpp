#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ifgeo/bench/dataset.hpp"
#include "ifgeo/llm/gateway.hpp"
#include "ifgeo/model.hpp"
#include "json.hpp"

namespace ifgeo::bench {

struct Method {
    enum class Kind { ifgeo, heuristic, per_query_tune };

    Kind kind = Kind::ifgeo;
    std::string heuristic;  // set when kind == heuristic

    /// "ifgeo", "per_query_tune" or "heuristic:<name>". Throws ConfigError.
    static Method parse(std::string_view text);
    std::string label() const;
};

struct ExperimentConfig {
    Method method;
    PipelineConfig pipeline;
    std::optional<std::vector<int>> sweep;  // n_queries values, one variant each
    bool strata = false;
    std::size_t sample_size = 0;  // queries; whole clusters are sampled, 0 = everything
    std::uint64_t seed = 0;
    bool judge = true;
    std::size_t parallelism = 1;  // records in flight
};

/// Throws ConfigError.
void validate(const ExperimentConfig& cfg);

nlohmann::json to_json(const ExperimentConfig& cfg);

struct VariantSummary {
    std::string label;
    int n_queries = 0;
    std::vector<std::string> completed;
    std::vector<std::string> quarantined;
};

struct RunSummary {
    std::filesystem::path run_dir;
    std::vector<std::string> sampled;  // doc_ids in dataset order
    std::vector<VariantSummary> variants;
    nlohmann::json aggregate;
};

/// Records chosen for a run: whole clusters, enough to cover `sample_size`
/// queries, drawn with `seed`.
std::vector<std::size_t> sample_records(const std::vector<BenchRecord>& records, std::size_t sample_size,
                                        std::uint64_t seed);

/// Target query of per-query tuning for one record: a seeded draw that
/// depends only on the seed and the doc_id.
std::size_t tuning_target(std::string_view doc_id, std::size_t n_queries, std::uint64_t seed);

/// File-system safe directory name for a doc_id.
std::string record_dir_name(std::string_view doc_id);

/// Evaluates every sampled record before and after the method and writes
/// the run directory:
///
///   manifest.json
///   records/<doc_id>/[N<k>/]artifacts.json, gains.json   (error.json when quarantined)
///   aggregate.json
///
/// A record that fails is quarantined and the run goes on; ConfigError and
/// BudgetExceeded abort the run.
RunSummary run_experiment(const ExperimentConfig& cfg, const std::vector<BenchRecord>& records,
                          llm::Gateway& gateway, const std::filesystem::path& run_dir);

/// Aggregate of one variant, recomputed from persisted per-record gains.
/// run_experiment stores exactly this under aggregate.json's "variants".
nlohmann::json aggregate_variant(const std::string& label, int n_queries, const std::vector<nlohmann::json>& gains,
                                 const std::vector<std::string>& quarantined, bool strata, bool competition);

}  // namespace ifgeo::bench
