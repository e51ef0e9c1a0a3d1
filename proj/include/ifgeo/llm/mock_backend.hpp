#pragma once

#include <atomic>
#include <cstdint>
#include <string>

#include "ifgeo/llm/gateway.hpp"

namespace ifgeo::llm {

/// Deterministic offline backend. Every reply is a pure function of the
/// cache key and the seed, and always validates against its stage schema.
///
/// Stage behaviour, in brief:
///   mining       salient document terms slotted into query templates
///   request_gen  sentence prefixes ranked by overlap with the query; additive
///                suggestions carry the sentence to insert in double quotes
///   dedup        merges items on the same excerpt with the same intent
///   conflict     "reduce" vs "expand" on one excerpt: Selection when the
///                necessity gap is >= 10, Synthesis otherwise
///   blueprint    one item per section holding the instructions' excerpts
///   revise       quoted text of each directive inserted as a new paragraph
///                at the end of the named section
///   engine       one sentence per source, in order, length growing with the
///                source's overlap with the question
///   judge        scores tracking the target's share of the answer
///   heuristic    a strategy-specific sentence appended to the page
class MockBackend : public Backend {
public:
    explicit MockBackend(std::uint64_t seed = 0);

    std::string id() const override;
    BackendReply complete(const PromptSpec& spec) override;

    std::size_t calls() const noexcept { return calls_.load(); }
    std::uint64_t seed() const noexcept { return seed_; }

private:
    std::uint64_t seed_;
    std::atomic<std::size_t> calls_{0};
};

/// Deterministic draws for the mock: splitmix64 over a starting state.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t state) : state_(state) {}

    std::uint64_t next();
    /// Uniform integer in [lo, hi].
    int between(int lo, int hi);

private:
    std::uint64_t state_;
};

}  // namespace ifgeo::llm
