#include "ifgeo/visibility.hpp"

#include <cmath>
#include <numeric>

#include "ifgeo/errors.hpp"
#include "ifgeo/llm/structured.hpp"
#include "ifgeo/prompts.hpp"

namespace ifgeo::visibility {

Decay Decay::exponential() {
    return {"exponential", [](std::size_t pos, std::size_t count) {
                return std::exp(-static_cast<double>(pos) / static_cast<double>(count));
            }};
}

Decay Decay::linear() {
    return {"linear", [](std::size_t pos, std::size_t count) {
                return 1.0 - static_cast<double>(pos) / static_cast<double>(count);
            }};
}

Decay Decay::uniform() {
    return {"uniform", [](std::size_t, std::size_t) { return 1.0; }};
}

namespace {

std::vector<double> raw_impressions(const engine::EngineResponse& resp, const Decay& decay, Volume volume) {
    std::vector<double> raw(resp.source_count, 0.0);
    const auto count = resp.sentences.size();
    for (std::size_t pos = 0; pos < count; ++pos) {
        const auto& s = resp.sentences[pos];
        if (s.cited.empty()) continue;
        const double mass = volume == Volume::words ? static_cast<double>(s.word_count) : 1.0;
        const double w = mass * decay.weight(pos, count);
        for (auto k : s.cited) {
            if (k >= 1 && k <= raw.size()) raw[k - 1] += w;
        }
    }
    return raw;
}

}  // namespace

std::vector<Impression> objective_impressions(const engine::EngineResponse& resp, const Decay& decay, Volume volume) {
    const auto raw = raw_impressions(resp, decay, volume);
    const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
    std::vector<Impression> out;
    out.reserve(raw.size());
    for (double r : raw) out.push_back({r, total > 0.0 ? r / total : 0.0});
    return out;
}

Impression objective_impression(const engine::EngineResponse& resp, std::size_t doc_index, const Decay& decay,
                                Volume volume) {
    if (doc_index < 1 || doc_index > resp.source_count) {
        throw IndexError("source " + std::to_string(doc_index) + " outside 1.." + std::to_string(resp.source_count));
    }
    return objective_impressions(resp, decay, volume)[doc_index - 1];
}

ObjectiveColumns objective_columns(const engine::EngineResponse& resp, std::size_t doc_index) {
    ObjectiveColumns c;
    c.word = objective_impression(resp, doc_index, Decay::uniform(), Volume::words).share;
    c.position = objective_impression(resp, doc_index, Decay::exponential(), Volume::sentences).share;
    c.overall = objective_impression(resp, doc_index, Decay::exponential(), Volume::words).share;
    return c;
}

Judge::Judge(llm::Gateway& gateway, double temperature) : gateway_(gateway), temperature_(temperature) {}

SubjectiveScore Judge::score(const engine::EngineResponse& resp, const Document& doc, std::size_t doc_index,
                             std::string_view query, llm::TokenMeter* meter) {
    const auto result =
        gateway_.complete_structured(prompts::judge(query, doc, doc_index, resp.text, temperature_), meter);
    SubjectiveScore s;
    for (std::size_t d = 0; d < llm::kJudgeDimensions.size(); ++d) {
        s.dims[d] = result.value.at(std::string(llm::kJudgeDimensions[d])).get<double>();
    }
    s.average = std::accumulate(s.dims.begin(), s.dims.end(), 0.0) / static_cast<double>(s.dims.size());
    return s;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / n)};
}

}  // namespace

std::vector<double> z_match(const std::vector<double>& values, const std::vector<double>& reference) {
    const auto [m, s] = mean_std(values);
    const auto [rm, rs] = mean_std(reference);
    std::vector<double> out;
    out.reserve(values.size());
    for (double x : values) out.push_back(s > 0.0 ? rm + (x - m) / s * rs : rm);
    return out;
}

}  // namespace ifgeo::visibility
