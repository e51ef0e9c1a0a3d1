#pragma once

#include <atomic>
#include <cstddef>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ifgeo/errors.hpp"
#include "ifgeo/llm/gateway.hpp"
#include "ifgeo/model.hpp"

namespace ifgeo {

/// Thread-safe collector for non-fatal findings of a run.
class RunLog {
public:
    void warn(std::string message);
    std::vector<std::string> warnings() const;

private:
    mutable std::mutex mutex_;
    std::vector<std::string> warnings_;
};

struct PipelineArtifacts {
    QuerySet query_set;
    std::vector<EditRequest> raw_pool;  // scored, unfiltered
    std::vector<EditRequest> filtered;  // what Phase II consumed
    std::vector<FusedInstruction> fused;
    std::optional<Blueprint> blueprint;
    Document revised;
    RunManifest manifest;
};

/// A stage failed; `partial` holds everything produced before it.
class PipelineAborted : public Error {
public:
    PipelineAborted(std::string stage, std::string what, PipelineArtifacts partial)
        : Error("pipeline aborted in " + stage + ": " + what), stage_(std::move(stage)), partial_(std::move(partial)) {}

    const std::string& stage() const noexcept { return stage_; }
    const PipelineArtifacts& partial() const noexcept { return partial_; }

private:
    std::string stage_;
    PipelineArtifacts partial_;
};

/// Sets global_priority = (w/100)(s/100) on every request. Throws IndexError
/// on a query_index outside the query set.
void score_requests(std::vector<EditRequest>& pool, const QuerySet& qs);

/// Scores a copy of `pool` and keeps the requests with priority >= tau, in
/// their original order.
std::vector<EditRequest> prioritize_and_filter(std::vector<EditRequest> pool, const QuerySet& qs, double tau);

/// One instruction per request (id "req_<i>_<j>", topic "q<i>"); the no_fusion
/// ablation and per-query tuning revise from these directly.
std::vector<FusedInstruction> lift_requests(const std::vector<EditRequest>& pool);

/// Outcome of comparing an original body with its revision, section by
/// section. Sections are matched on heading text and occurrence order.
struct PreservationReport {
    std::vector<std::string> violated;  // unnamed sections whose text changed
    std::vector<std::string> missing;   // original sections absent from the revision
    bool clean() const noexcept { return violated.empty() && missing.empty(); }
};

/// `named` holds indices into index_sections(original). Trailing whitespace
/// at a section's end is layout between sections and is not compared.
PreservationReport check_preservation(std::string_view original, std::string_view revised,
                                      const std::set<std::size_t>& named);

/// Restores every violated or missing unnamed section from the original.
std::string restore_sections(std::string_view original, std::string_view revised,
                             const std::set<std::size_t>& named);

/// The IF-GEO pipeline bound to one gateway. Every completion it issues is
/// metered into the pipeline's own TokenMeter, so one instance per document
/// run gives per-run token accounting.
class Pipeline {
public:
    Pipeline(llm::Gateway& gateway, PipelineConfig config, std::uint64_t seed = 0);

    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;

    QuerySet mine_queries(const Document& doc);

    std::vector<EditRequest> generate_requests(const Document& doc, const WeightedQuery& q, std::size_t query_index);

    /// generate_requests for every query concurrently, results in query order.
    std::vector<EditRequest> generate_all(const Document& doc, const QuerySet& qs);

    std::vector<FusedInstruction> deduplicate(const QuerySet& qs, const std::vector<EditRequest>& pool);

    std::vector<FusedInstruction> resolve_conflicts(const QuerySet& qs, const std::vector<FusedInstruction>& items);

    Blueprint build_blueprint(const Document& doc, const std::vector<FusedInstruction>& items);

    Document execute_blueprint(const Document& doc, const Blueprint& bp);

    /// Revision from a flat instruction list (no blueprint). The sections
    /// holding the instructions' anchors count as named for preservation.
    Document execute_flat(const Document& doc, const std::vector<FusedInstruction>& items);

    /// mine -> generate -> prioritize -> dedup -> conflict -> blueprint ->
    /// execute, honouring the ablation switches. Throws PipelineAborted;
    /// ConfigError and BudgetExceeded pass through unwrapped.
    PipelineArtifacts run(const Document& doc);

    /// Rewrites the document from the requests of query `target_index` only.
    /// Requests are generated for every query; the others are never shown to
    /// the editor.
    Document per_query_tune(const Document& doc, const QuerySet& qs, std::size_t target_index);

    const PipelineConfig& config() const noexcept { return config_; }
    const llm::TokenMeter& meter() const noexcept { return meter_; }
    const RunLog& log() const noexcept { return log_; }
    std::vector<std::string> preservation_violations() const;
    std::size_t cache_hits() const noexcept { return cache_hits_.load(); }

private:
    llm::StructuredCompletion call(const llm::PromptSpec& spec);
    Document revise_and_check(const Document& doc, const llm::PromptSpec& spec, const std::set<std::size_t>& named);

    llm::Gateway& gateway_;
    PipelineConfig config_;
    std::uint64_t seed_;
    llm::TokenMeter meter_;
    RunLog log_;
    RunLog violations_;
    std::atomic<std::size_t> cache_hits_{0};
};

}  // namespace ifgeo
