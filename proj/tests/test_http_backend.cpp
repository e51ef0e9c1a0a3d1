#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "ifgeo/errors.hpp"
#include "ifgeo/llm/http_backend.hpp"

using namespace ifgeo;
using namespace ifgeo::llm;

namespace {

/// Loopback chat-completions server answering with a fixed status and body.
class FakeProvider {
public:
    FakeProvider() {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            last_body = req.body;
            last_auth = req.get_header_value("Authorization");
            res.status = status;
            res.set_content(body, "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeProvider() {
        server_.stop();
        thread_.join();
    }

    HttpBackendConfig config() const {
        HttpBackendConfig c;
        c.base_url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/";
        c.model = "test-model";
        c.api_key = "secret";
        c.timeout = std::chrono::seconds(5);
        return c;
    }

    int status = 200;
    std::string body;
    std::string last_body;
    std::string last_auth;

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

PromptSpec spec() {
    PromptSpec p;
    p.stage = Stage::engine;
    p.system_text = "sys";
    p.user_text = "question";
    p.temperature = 0.0;
    p.max_tokens = 64;
    return p;
}

}  // namespace

TEST(HttpBackend, ParsesContentAndUsage) {
    FakeProvider fake;
    fake.body = R"({"choices": [{"message": {"content": "hello [1]."}}], "usage": {"prompt_tokens": 11, "completion_tokens": 4}})";
    HttpBackend b(fake.config());
    const auto r = b.complete(spec());
    EXPECT_EQ(r.text, "hello [1].");
    EXPECT_EQ(r.prompt_tokens, 11);
    EXPECT_EQ(r.completion_tokens, 4);
    EXPECT_EQ(fake.last_auth, "Bearer secret");
    const auto sent = nlohmann::json::parse(fake.last_body);
    EXPECT_EQ(sent["model"], "test-model");
    EXPECT_EQ(sent["messages"][0]["role"], "system");
    EXPECT_EQ(sent["messages"][1]["content"], "question");
    EXPECT_EQ(sent["temperature"], 0.0);
    EXPECT_EQ(sent["max_tokens"], 64);
    EXPECT_EQ(b.id(), "openai-compatible/test-model");
}

TEST(HttpBackend, EstimatesTokensWithoutUsage) {
    FakeProvider fake;
    fake.body = R"({"choices": [{"message": {"content": "abcdefgh"}}]})";
    const auto r = HttpBackend(fake.config()).complete(spec());
    EXPECT_EQ(r.completion_tokens, 2);
    EXPECT_EQ(r.prompt_tokens, estimate_tokens("sys") + estimate_tokens("question"));
}

TEST(HttpBackend, StatusClassification) {
    FakeProvider fake;
    fake.body = "{}";
    HttpBackend b(fake.config());
    fake.status = 429;
    EXPECT_THROW(b.complete(spec()), TransportError);
    fake.status = 503;
    EXPECT_THROW(b.complete(spec()), TransportError);
    fake.status = 400;
    EXPECT_THROW(b.complete(spec()), BackendRefusal);
    fake.status = 200;
    fake.body = "not json";
    EXPECT_THROW(b.complete(spec()), BackendRefusal);
    fake.body = R"({"choices": []})";
    EXPECT_THROW(b.complete(spec()), BackendRefusal);
}

TEST(HttpBackend, UnreachableHostIsTransportError) {
    HttpBackendConfig c;
    c.base_url = "http://127.0.0.1:1";
    c.model = "m";
    c.timeout = std::chrono::seconds(2);
    EXPECT_THROW(HttpBackend(c).complete(spec()), TransportError);
}

TEST(HttpBackend, SplitBaseUrl) {
    EXPECT_EQ(split_base_url("https://host:8443/v1/"), (std::pair<std::string, std::string>{"https://host:8443", "/v1"}));
    EXPECT_EQ(split_base_url("http://h"), (std::pair<std::string, std::string>{"http://h", ""}));
    EXPECT_THROW(split_base_url("host/v1"), ConfigError);
}

TEST(HttpBackend, ConfigFromEnvironment) {
    ::unsetenv("IFGEO_BASE_URL");
    ::setenv("IFGEO_MODEL", "m", 1);
    EXPECT_THROW(http_config_from_env(), ConfigError);
    ::setenv("IFGEO_BASE_URL", "http://x/v1", 1);
    ::unsetenv("IFGEO_API_KEY");
    ::setenv("OPENAI_API_KEY", "fallback", 1);
    const auto c = http_config_from_env();
    EXPECT_EQ(c.model, "m");
    EXPECT_EQ(c.api_key, "fallback");
    ::unsetenv("IFGEO_MODEL");
    EXPECT_THROW(http_config_from_env(), ConfigError);
    ::unsetenv("IFGEO_BASE_URL");
    ::unsetenv("OPENAI_API_KEY");
}
