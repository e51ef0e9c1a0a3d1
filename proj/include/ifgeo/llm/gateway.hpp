#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "ifgeo/model.hpp"
#include "ifgeo/stage.hpp"
#include "json.hpp"

namespace ifgeo::llm {

struct PromptSpec {
    Stage stage = Stage::mining;
    std::string system_text;
    std::string user_text;
    double temperature = 0.2;
    int max_tokens = 2048;
};

struct Completion {
    std::string raw_text;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    bool cached = false;
    std::string backend_id;

    std::int64_t total_tokens() const noexcept { return prompt_tokens + completion_tokens; }
};

/// What a backend hands back for a single call.
struct BackendReply {
    std::string text;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

/// A chat-completion provider. Implementations throw TransportError for
/// failures worth retrying and BackendRefusal for everything else.
class Backend {
public:
    virtual ~Backend() = default;

    virtual std::string id() const = 0;
    virtual BackendReply complete(const PromptSpec& spec) = 0;
};

/// Rough token estimate (4 bytes per token, at least 1 for non-empty text).
std::int64_t estimate_tokens(std::string_view text);

/// Content hash of everything that determines a completion; the hex digest
/// names the on-disk cache entry.
std::string cache_key(std::string_view backend_id, const PromptSpec& spec);

/// Per-stage prompt/completion counters. Safe for concurrent add().
class TokenMeter {
public:
    TokenMeter() = default;
    TokenMeter(const TokenMeter&) = delete;
    TokenMeter& operator=(const TokenMeter&) = delete;

    void add(Stage stage, std::int64_t prompt, std::int64_t completion);
    StageTokens get(Stage stage) const;
    std::array<StageTokens, kStageCount> snapshot() const;
    std::int64_t total() const;
    void reset();

private:
    std::array<std::atomic<std::int64_t>, kStageCount> prompt_{};
    std::array<std::atomic<std::int64_t>, kStageCount> completion_{};
};

/// In-memory cache with optional directory persistence (one JSON file per
/// key, written to a temp file and renamed into place).
class ResponseCache {
public:
    explicit ResponseCache(std::optional<std::filesystem::path> dir = std::nullopt);

    std::optional<Completion> get(const std::string& key) const;
    void put(const std::string& key, const Completion& completion);
    std::size_t size() const;

    const std::optional<std::filesystem::path>& directory() const noexcept { return dir_; }

private:
    std::optional<std::filesystem::path> dir_;
    mutable std::shared_mutex mutex_;
    mutable std::unordered_map<std::string, Completion> memory_;
};

struct GatewayOptions {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    int max_in_flight = 4;
    std::optional<std::int64_t> token_budget;  // billed (uncached) tokens
    bool use_cache = true;
    std::optional<std::filesystem::path> cache_dir;
};

struct GatewayStats {
    std::size_t calls = 0;
    std::size_t cache_hits = 0;
    std::size_t retries = 0;
    std::size_t repairs = 0;
    std::int64_t billed_tokens = 0;
};

/// Result of a call whose output is validated against the stage schema.
struct StructuredCompletion {
    nlohmann::json value;
    std::vector<std::string> warnings;
    bool repaired = false;
    Completion completion;  // the completion the value came from
};

class Gateway {
public:
    Gateway(std::shared_ptr<Backend> backend, GatewayOptions options = {});

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    /// Cache lookup, then the backend with bounded retries. Tokens are added
    /// to the gateway meter and to `run_meter` when given, cached or not.
    Completion complete(const PromptSpec& spec, TokenMeter* run_meter = nullptr);

    /// complete() followed by extract_structured(). One repair re-ask, with
    /// the validator error appended, when the first reply does not validate.
    StructuredCompletion complete_structured(const PromptSpec& spec, TokenMeter* run_meter = nullptr);

    const TokenMeter& meter() const noexcept { return meter_; }
    GatewayStats stats() const;
    std::string backend_id() const { return backend_->id(); }
    const GatewayOptions& options() const noexcept { return options_; }

private:
    BackendReply call_with_retries(const PromptSpec& spec);

    std::shared_ptr<Backend> backend_;
    GatewayOptions options_;
    ResponseCache cache_;
    TokenMeter meter_;
    std::counting_semaphore<1024> in_flight_;
    std::atomic<std::size_t> calls_{0};
    std::atomic<std::size_t> cache_hits_{0};
    std::atomic<std::size_t> retries_{0};
    std::atomic<std::size_t> repairs_{0};
    std::atomic<std::int64_t> billed_{0};
};

nlohmann::json to_json(const Completion& c);
Completion completion_from_json(const nlohmann::json& j);

}  // namespace ifgeo::llm
