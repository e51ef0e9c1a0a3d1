#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ifgeo::stability {

/// Per-query visibility gains of one document.
struct GainVector {
    std::string doc_id;
    std::vector<double> gains;
    std::optional<std::vector<double>> weights;
};

/// gains[i] = after[i] - before[i]. Throws LengthMismatch on unequal or
/// empty inputs.
GainVector gain_vector(const std::vector<double>& before, const std::vector<double>& after, std::string doc_id = {});

enum class VarianceKind { population, sample };

struct StabilityReport {
    double mean = 0.0;
    double variance = 0.0;
    double wcp = 0.0;  // worst case: min gain
    double wtr = 0.0;  // fraction of gains >= 0
    double dr = 0.0;   // mean of min(0, gain)^2
    bool per_document = true;
    std::size_t count = 0;  // queries for a document, documents for an average
};

StabilityReport stability_summary(const GainVector& g, VarianceKind variance = VarianceKind::population);

/// Field-wise mean of per-document reports (count = number of reports).
/// An empty list gives an all-zero report with count 0.
StabilityReport average_reports(const std::vector<StabilityReport>& reports);

enum class AggregationKind { mean, variance, wcp, wtr, dr, custom };

std::string_view aggregation_name(AggregationKind k);
/// Throws UnknownKind.
AggregationKind aggregation_from_name(std::string_view name);

struct AggregationSpec {
    AggregationKind kind = AggregationKind::mean;
    std::function<double(const std::vector<double>&)> custom;  // required for kind == custom
};

/// Throws UnknownKind for a custom spec without a hook or an invalid kind.
double aggregate(const GainVector& g, const AggregationSpec& spec);

struct PopulationStats {
    double mean = 0.0;
    double p_negative = 0.0;  // fraction strictly below zero
    double dm = 0.0;          // mean of -min(0, x)
    std::size_t count = 0;
};

PopulationStats population_stats(const std::vector<double>& values);

struct CompetitionReport {
    PopulationStats target;      // gains on the tuned query
    PopulationStats non_target;  // gains on every other query
    PopulationStats spillover;   // r_j = gain_j - gain_target, per (target, j) pair
};

/// Throws IndexError when targets[k] is outside all_gains[k], or when the
/// two lists differ in length.
CompetitionReport competition_stats(const std::vector<GainVector>& all_gains, const std::vector<std::size_t>& targets);

}  // namespace ifgeo::stability
