#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ifgeo/engine.hpp"
#include "ifgeo/llm/gateway.hpp"

namespace ifgeo::visibility {

/// Positional weight of a sentence at 0-based `pos` in a response of
/// `count` sentences.
struct Decay {
    std::string name;
    std::function<double(std::size_t pos, std::size_t count)> weight;

    static Decay exponential();  // exp(-pos / count)
    static Decay linear();       // 1 - pos / count
    static Decay uniform();      // 1
};

/// What a citing sentence contributes before decay.
enum class Volume { words, sentences };

struct Impression {
    double raw = 0.0;
    double share = 0.0;
};

/// Position-adjusted word count of source `doc_index` (1-based):
/// raw = sum over sentences s citing it of wc(s) * decay(pos(s), S),
/// share = raw / sum of raw over all sources (0 when nothing is cited).
Impression objective_impression(const engine::EngineResponse& resp, std::size_t doc_index,
                                const Decay& decay = Decay::exponential(), Volume volume = Volume::words);

/// objective_impression for sources 1..N, index k-1 holding source k.
std::vector<Impression> objective_impressions(const engine::EngineResponse& resp,
                                              const Decay& decay = Decay::exponential(),
                                              Volume volume = Volume::words);

/// The three objective report columns, as shares.
struct ObjectiveColumns {
    double word = 0.0;      // uniform decay, word volume
    double position = 0.0;  // exponential decay, one unit per citing sentence
    double overall = 0.0;   // exponential decay, word volume (PAWC)
};

ObjectiveColumns objective_columns(const engine::EngineResponse& resp, std::size_t doc_index);

struct SubjectiveScore {
    std::array<double, 7> dims{};  // in kJudgeDimensions order
    double average = 0.0;
};

struct VisibilityScore {
    std::size_t doc_index = 0;
    double objective_raw = 0.0;
    double objective_share = 0.0;
    std::optional<SubjectiveScore> subjective;
};

/// LLM-as-a-judge scorer over the seven rubric dimensions.
class Judge {
public:
    explicit Judge(llm::Gateway& gateway, double temperature = 0.0);

    SubjectiveScore score(const engine::EngineResponse& resp, const Document& doc, std::size_t doc_index,
                          std::string_view query, llm::TokenMeter* meter = nullptr);

private:
    llm::Gateway& gateway_;
    double temperature_;
};

/// Rescales `values` so their mean and population standard deviation equal
/// those of `reference`. A constant `values` maps onto the reference mean.
std::vector<double> z_match(const std::vector<double>& values, const std::vector<double>& reference);

}  // namespace ifgeo::visibility
