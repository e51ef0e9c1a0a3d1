#include "ifgeo/stability.hpp"

#include <algorithm>
#include <cmath>

#include "ifgeo/errors.hpp"

namespace ifgeo::stability {

GainVector gain_vector(const std::vector<double>& before, const std::vector<double>& after, std::string doc_id) {
    if (before.size() != after.size()) {
        throw LengthMismatch("before has " + std::to_string(before.size()) + " values, after has " +
                             std::to_string(after.size()));
    }
    if (before.empty()) throw LengthMismatch("gain vectors need at least one query");
    GainVector g;
    g.doc_id = std::move(doc_id);
    g.gains.reserve(before.size());
    for (std::size_t i = 0; i < before.size(); ++i) g.gains.push_back(after[i] - before[i]);
    return g;
}

StabilityReport stability_summary(const GainVector& g, VarianceKind variance) {
    StabilityReport r;
    const auto m = g.gains.size();
    r.count = m;
    if (m == 0) return r;
    double sum = 0.0, dr = 0.0;
    std::size_t wins = 0;
    r.wcp = g.gains.front();
    for (double x : g.gains) {
        sum += x;
        r.wcp = std::min(r.wcp, x);
        if (x >= 0.0) ++wins;
        const double down = std::min(0.0, x);
        dr += down * down;
    }
    const double n = static_cast<double>(m);
    r.mean = sum / n;
    double ss = 0.0;
    for (double x : g.gains) ss += (x - r.mean) * (x - r.mean);
    if (variance == VarianceKind::population) {
        r.variance = ss / n;
    } else {
        r.variance = m > 1 ? ss / (n - 1.0) : 0.0;
    }
    r.wtr = static_cast<double>(wins) / n;
    r.dr = dr / n;
    return r;
}

StabilityReport average_reports(const std::vector<StabilityReport>& reports) {
    StabilityReport out;
    out.per_document = false;
    out.count = reports.size();
    if (reports.empty()) return out;
    for (const auto& r : reports) {
        out.mean += r.mean;
        out.variance += r.variance;
        out.wcp += r.wcp;
        out.wtr += r.wtr;
        out.dr += r.dr;
    }
    const double n = static_cast<double>(reports.size());
    out.mean /= n;
    out.variance /= n;
    out.wcp /= n;
    out.wtr /= n;
    out.dr /= n;
    return out;
}

std::string_view aggregation_name(AggregationKind k) {
    switch (k) {
        case AggregationKind::mean: return "mean";
        case AggregationKind::variance: return "variance";
        case AggregationKind::wcp: return "wcp";
        case AggregationKind::wtr: return "wtr";
        case AggregationKind::dr: return "dr";
        case AggregationKind::custom: return "custom";
    }
    return "unknown";
}

AggregationKind aggregation_from_name(std::string_view name) {
    for (auto k : {AggregationKind::mean, AggregationKind::variance, AggregationKind::wcp, AggregationKind::wtr,
                   AggregationKind::dr, AggregationKind::custom}) {
        if (aggregation_name(k) == name) return k;
    }
    throw UnknownKind("unknown aggregation '" + std::string(name) + "'");
}

double aggregate(const GainVector& g, const AggregationSpec& spec) {
    switch (spec.kind) {
        case AggregationKind::mean: return stability_summary(g).mean;
        case AggregationKind::variance: return stability_summary(g).variance;
        case AggregationKind::wcp: return stability_summary(g).wcp;
        case AggregationKind::wtr: return stability_summary(g).wtr;
        case AggregationKind::dr: return stability_summary(g).dr;
        case AggregationKind::custom:
            if (!spec.custom) throw UnknownKind("custom aggregation without a hook");
            return spec.custom(g.gains);
    }
    throw UnknownKind("invalid aggregation kind");
}

PopulationStats population_stats(const std::vector<double>& values) {
    PopulationStats s;
    s.count = values.size();
    if (values.empty()) return s;
    std::size_t negative = 0;
    for (double x : values) {
        s.mean += x;
        if (x < 0.0) ++negative;
        s.dm += -std::min(0.0, x);
    }
    const double n = static_cast<double>(values.size());
    s.mean /= n;
    s.dm /= n;
    s.p_negative = static_cast<double>(negative) / n;
    return s;
}

CompetitionReport competition_stats(const std::vector<GainVector>& all_gains, const std::vector<std::size_t>& targets) {
    if (all_gains.size() != targets.size()) {
        throw IndexError("competition_stats got " + std::to_string(all_gains.size()) + " gain vectors and " +
                         std::to_string(targets.size()) + " targets");
    }
    std::vector<double> target, non_target, spillover;
    for (std::size_t k = 0; k < all_gains.size(); ++k) {
        const auto& g = all_gains[k].gains;
        const auto t = targets[k];
        if (t >= g.size()) {
            throw IndexError("target " + std::to_string(t) + " outside gain vector of length " +
                             std::to_string(g.size()));
        }
        target.push_back(g[t]);
        for (std::size_t j = 0; j < g.size(); ++j) {
            if (j == t) continue;
            non_target.push_back(g[j]);
            spillover.push_back(g[j] - g[t]);
        }
    }
    return {population_stats(target), population_stats(non_target), population_stats(spillover)};
}

}  // namespace ifgeo::stability
