#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "ifgeo/llm/gateway.hpp"

namespace ifgeo::llm {

struct HttpBackendConfig {
    std::string base_url;  // e.g. https://api.openai.com/v1
    std::string model;
    std::string api_key;
    std::chrono::seconds timeout{120};
};

/// Reads IFGEO_BASE_URL, IFGEO_MODEL and IFGEO_API_KEY (OPENAI_API_KEY as a
/// fallback). Missing base URL or model throws ConfigError.
HttpBackendConfig http_config_from_env();

/// OpenAI-compatible chat-completions client: POST {base_url}/chat/completions.
/// Connection failures, 429 and 5xx throw TransportError; other 4xx and
/// unusable bodies throw BackendRefusal.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpBackendConfig config);

    std::string id() const override;
    BackendReply complete(const PromptSpec& spec) override;

    /// The request body sent for `spec`.
    nlohmann::json request_body(const PromptSpec& spec) const;

private:
    HttpBackendConfig config_;
    std::string origin_;  // scheme://host[:port]
    std::string path_;    // path prefix, no trailing slash
};

/// Splits "https://host:8443/v1/" into {"https://host:8443", "/v1"}.
std::pair<std::string, std::string> split_base_url(std::string_view url);

}  // namespace ifgeo::llm
