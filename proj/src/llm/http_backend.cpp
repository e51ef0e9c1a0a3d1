#include "ifgeo/llm/http_backend.hpp"

#include <cstdlib>

#include "httplib.h"
#include "ifgeo/errors.hpp"

namespace ifgeo::llm {

using nlohmann::json;

namespace {

std::string env_or(const char* name, std::string fallback = {}) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : std::move(fallback);
}

}  // namespace

HttpBackendConfig http_config_from_env() {
    HttpBackendConfig cfg;
    cfg.base_url = env_or("IFGEO_BASE_URL");
    cfg.model = env_or("IFGEO_MODEL");
    cfg.api_key = env_or("IFGEO_API_KEY", env_or("OPENAI_API_KEY"));
    if (cfg.base_url.empty()) throw ConfigError("IFGEO_BASE_URL is not set");
    if (cfg.model.empty()) throw ConfigError("IFGEO_MODEL is not set");
    return cfg;
}

std::pair<std::string, std::string> split_base_url(std::string_view url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) throw ConfigError("base URL lacks a scheme: " + std::string(url));
    const auto path_start = url.find('/', scheme_end + 3);
    std::string origin(url.substr(0, path_start));
    std::string path = path_start == std::string_view::npos ? std::string{} : std::string(url.substr(path_start));
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {origin, path};
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.model.empty()) throw ConfigError("HTTP backend needs a model name");
    std::tie(origin_, path_) = split_base_url(config_.base_url);
}

std::string HttpBackend::id() const { return "openai-compatible/" + config_.model; }

json HttpBackend::request_body(const PromptSpec& spec) const {
    return {
        {"model", config_.model},
        {"messages",
         json::array({
             {{"role", "system"}, {"content", spec.system_text}},
             {{"role", "user"}, {"content", spec.user_text}},
         })},
        {"temperature", spec.temperature},
        {"max_tokens", spec.max_tokens},
    };
}

BackendReply HttpBackend::complete(const PromptSpec& spec) {
    httplib::Client client(origin_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    const auto res = client.Post(path_ + "/chat/completions", headers, request_body(spec).dump(), "application/json");
    if (!res) throw TransportError("HTTP request failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) {
        throw TransportError("HTTP " + std::to_string(res->status) + " from " + origin_);
    }
    if (res->status < 200 || res->status >= 300) {
        throw BackendRefusal("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 500));
    }
    const auto body = json::parse(res->body, nullptr, false);
    if (body.is_discarded()) throw BackendRefusal("unparsable provider response");
    try {
        BackendReply reply;
        const auto& content = body.at("choices").at(0).at("message").at("content");
        reply.text = content.is_string() ? content.get<std::string>() : std::string{};
        if (const auto usage = body.find("usage"); usage != body.end() && usage->is_object()) {
            reply.prompt_tokens = usage->value("prompt_tokens", std::int64_t{0});
            reply.completion_tokens = usage->value("completion_tokens", std::int64_t{0});
        } else {
            reply.prompt_tokens = estimate_tokens(spec.system_text) + estimate_tokens(spec.user_text);
            reply.completion_tokens = estimate_tokens(reply.text);
        }
        if (reply.text.empty()) throw BackendRefusal("provider returned an empty message");
        return reply;
    } catch (const json::exception& e) {
        throw BackendRefusal(std::string("unexpected provider response shape: ") + e.what());
    }
}

}  // namespace ifgeo::llm
