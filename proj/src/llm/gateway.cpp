#include "ifgeo/llm/gateway.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include "ifgeo/errors.hpp"
#include "ifgeo/llm/structured.hpp"
#include "ifgeo/text.hpp"

namespace ifgeo::llm {

using nlohmann::json;

std::int64_t estimate_tokens(std::string_view text) {
    if (text.empty()) return 0;
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

namespace {

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 digest failed");
    }
    return text::to_hex(std::string_view(reinterpret_cast<const char*>(digest), len));
}

}  // namespace

std::string cache_key(std::string_view backend_id, const PromptSpec& spec) {
    const json material = json::array({
        std::string(backend_id),
        std::string(stage_name(spec.stage)),
        spec.system_text,
        spec.user_text,
        spec.temperature,
        spec.max_tokens,
    });
    return sha256_hex(material.dump());
}

// TokenMeter

void TokenMeter::add(Stage stage, std::int64_t prompt, std::int64_t completion) {
    prompt_[stage_slot(stage)].fetch_add(prompt, std::memory_order_relaxed);
    completion_[stage_slot(stage)].fetch_add(completion, std::memory_order_relaxed);
}

StageTokens TokenMeter::get(Stage stage) const {
    return {prompt_[stage_slot(stage)].load(), completion_[stage_slot(stage)].load()};
}

std::array<StageTokens, kStageCount> TokenMeter::snapshot() const {
    std::array<StageTokens, kStageCount> out{};
    for (auto s : kAllStages) out[stage_slot(s)] = get(s);
    return out;
}

std::int64_t TokenMeter::total() const {
    std::int64_t t = 0;
    for (auto s : kAllStages) t += get(s).total();
    return t;
}

void TokenMeter::reset() {
    for (auto& a : prompt_) a.store(0);
    for (auto& a : completion_) a.store(0);
}

// Completion records

json to_json(const Completion& c) {
    return {
        {"raw_text", c.raw_text},
        {"prompt_tokens", c.prompt_tokens},
        {"completion_tokens", c.completion_tokens},
        {"cached", c.cached},
        {"backend_id", c.backend_id},
    };
}

Completion completion_from_json(const json& j) {
    Completion c;
    c.raw_text = j.at("raw_text").get<std::string>();
    c.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
    c.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
    c.cached = j.value("cached", false);
    c.backend_id = j.value("backend_id", std::string{});
    return c;
}

// ResponseCache

ResponseCache::ResponseCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
    if (dir_) std::filesystem::create_directories(*dir_);
}

std::optional<Completion> ResponseCache::get(const std::string& key) const {
    {
        std::shared_lock lock(mutex_);
        if (auto it = memory_.find(key); it != memory_.end()) return it->second;
    }
    if (!dir_) return std::nullopt;
    std::ifstream in(*dir_ / (key + ".json"), std::ios::binary);
    if (!in) return std::nullopt;
    auto parsed = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded()) return std::nullopt;
    Completion c;
    try {
        c = completion_from_json(parsed);
    } catch (const json::exception&) {
        return std::nullopt;
    }
    std::unique_lock lock(mutex_);
    memory_.emplace(key, c);
    return c;
}

void ResponseCache::put(const std::string& key, const Completion& completion) {
    {
        std::unique_lock lock(mutex_);
        memory_[key] = completion;
    }
    if (!dir_) return;
    std::ostringstream tid;
    tid << std::this_thread::get_id();
    const auto final_path = *dir_ / (key + ".json");
    const auto tmp_path = *dir_ / (key + ".json.tmp." + tid.str());
    {
        std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write cache entry " + tmp_path.string());
        out << to_json(completion).dump(2);
    }
    std::filesystem::rename(tmp_path, final_path);
}

std::size_t ResponseCache::size() const {
    std::shared_lock lock(mutex_);
    return memory_.size();
}

// Gateway

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayOptions options)
    : backend_(std::move(backend)),
      options_(std::move(options)),
      cache_(options_.use_cache ? options_.cache_dir : std::nullopt),
      in_flight_(std::max(1, options_.max_in_flight)) {
    if (!backend_) throw ConfigError("gateway requires a backend");
    if (options_.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
    if (options_.max_in_flight < 1 || options_.max_in_flight > 1024) {
        throw ConfigError("max_in_flight must lie in 1..1024");
    }
}

BackendReply Gateway::call_with_retries(const PromptSpec& spec) {
    auto backoff = options_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            in_flight_.acquire();
            struct Release {
                std::counting_semaphore<1024>& s;
                ~Release() { s.release(); }
            } release{in_flight_};
            return backend_->complete(spec);
        } catch (const TransportError& e) {
            if (attempt >= options_.max_attempts) {
                throw TransportError(std::string(e.what()) + " (after " + std::to_string(attempt) +
                                     " attempts)");
            }
            retries_.fetch_add(1);
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
}

Completion Gateway::complete(const PromptSpec& spec, TokenMeter* run_meter) {
    if (text::trim(spec.system_text).empty() || text::trim(spec.user_text).empty()) {
        throw ConfigError("prompt for stage '" + std::string(stage_name(spec.stage)) +
                          "' has empty system or user text");
    }
    if (spec.temperature < 0.0 || spec.max_tokens <= 0) {
        throw ConfigError("invalid decoding parameters");
    }
    const auto backend_id = backend_->id();
    const auto key = cache_key(backend_id, spec);
    calls_.fetch_add(1);

    auto account = [&](const Completion& c) {
        meter_.add(spec.stage, c.prompt_tokens, c.completion_tokens);
        if (run_meter) run_meter->add(spec.stage, c.prompt_tokens, c.completion_tokens);
    };

    if (options_.use_cache) {
        if (auto hit = cache_.get(key)) {
            hit->cached = true;
            cache_hits_.fetch_add(1);
            account(*hit);
            return *hit;
        }
    }
    if (options_.token_budget && billed_.load() >= *options_.token_budget) {
        throw BudgetExceeded("token budget of " + std::to_string(*options_.token_budget) +
                             " exhausted before stage '" + std::string(stage_name(spec.stage)) + "'");
    }

    const auto reply = call_with_retries(spec);
    Completion c;
    c.raw_text = reply.text;
    c.prompt_tokens = std::max<std::int64_t>(0, reply.prompt_tokens);
    c.completion_tokens = std::max<std::int64_t>(0, reply.completion_tokens);
    c.backend_id = backend_id;
    c.cached = false;
    billed_.fetch_add(c.total_tokens());
    if (options_.use_cache) cache_.put(key, c);
    account(c);
    return c;
}

StructuredCompletion Gateway::complete_structured(const PromptSpec& spec, TokenMeter* run_meter) {
    StructuredCompletion out;
    out.completion = complete(spec, run_meter);
    try {
        auto payload = extract_structured(out.completion.raw_text, spec.stage);
        out.value = std::move(payload.value);
        out.warnings = std::move(payload.warnings);
        return out;
    } catch (const SchemaError& e) {
        out.warnings.push_back(std::string("repairing ") + std::string(stage_name(spec.stage)) +
                               " output: " + e.what());
    } catch (const ParseError& e) {
        out.warnings.push_back(std::string("repairing ") + std::string(stage_name(spec.stage)) +
                               " output: " + e.what());
    }

    repairs_.fetch_add(1);
    PromptSpec repair = spec;
    repair.user_text += "\n\nYour previous reply could not be used (" + out.warnings.back().substr(
                            out.warnings.back().find(": ") + 2) +
                        "). Reply again with only the required output format.";
    out.completion = complete(repair, run_meter);
    auto payload = extract_structured(out.completion.raw_text, spec.stage);
    out.value = std::move(payload.value);
    out.warnings.insert(out.warnings.end(), payload.warnings.begin(), payload.warnings.end());
    out.repaired = true;
    return out;
}

GatewayStats Gateway::stats() const {
    GatewayStats s;
    s.calls = calls_.load();
    s.cache_hits = cache_hits_.load();
    s.retries = retries_.load();
    s.repairs = repairs_.load();
    s.billed_tokens = billed_.load();
    return s;
}

}  // namespace ifgeo::llm
