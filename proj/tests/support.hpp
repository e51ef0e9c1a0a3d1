#pragma once

#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "ifgeo/errors.hpp"
#include "ifgeo/llm/gateway.hpp"
#include "ifgeo/llm/mock_backend.hpp"

namespace ifgeo::testing {

/// Replies from a per-stage queue, or from a handler when one is set. Every
/// received spec is recorded.
class ScriptedBackend : public llm::Backend {
public:
    using Handler = std::function<std::string(const llm::PromptSpec&)>;

    std::string id() const override { return "scripted"; }

    llm::BackendReply complete(const llm::PromptSpec& spec) override {
        std::lock_guard lock(mutex_);
        seen.push_back(spec);
        if (failures_left > 0) {
            --failures_left;
            throw TransportError("scripted transport failure");
        }
        std::string text;
        if (handler) {
            text = handler(spec);
        } else {
            auto& q = queues[stage_slot(spec.stage)];
            if (q.empty()) throw BackendRefusal("no scripted reply for " + std::string(stage_name(spec.stage)));
            text = q.front();
            q.pop_front();
        }
        return {text, static_cast<std::int64_t>(spec.user_text.size() / 4 + 1),
                static_cast<std::int64_t>(text.size() / 4 + 1)};
    }

    void push(Stage s, std::string reply) { queues[stage_slot(s)].push_back(std::move(reply)); }

    std::vector<llm::PromptSpec> seen;
    std::array<std::deque<std::string>, kStageCount> queues;
    Handler handler;
    int failures_left = 0;

private:
    std::mutex mutex_;
};

/// Backend that defers to the mock but lets a test rewrite chosen stages.
class PatchedMock : public llm::Backend {
public:
    using Patch = std::function<std::string(const llm::PromptSpec&, const std::string& mock_reply)>;

    explicit PatchedMock(std::uint64_t seed = 0) : mock_(seed) {}

    std::string id() const override { return "patched-" + mock_.id(); }

    llm::BackendReply complete(const llm::PromptSpec& spec) override {
        auto reply = mock_.complete(spec);
        if (auto it = patches.find(spec.stage); it != patches.end()) reply.text = it->second(spec, reply.text);
        std::lock_guard lock(mutex_);
        seen.push_back(spec);
        return reply;
    }

    std::map<Stage, Patch> patches;
    std::vector<llm::PromptSpec> seen;

private:
    llm::MockBackend mock_;
    std::mutex mutex_;
};

inline llm::GatewayOptions fast_options() {
    llm::GatewayOptions o;
    o.initial_backoff = std::chrono::milliseconds(0);
    return o;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("ifgeo-test-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::string data_path(const std::string& name) { return std::string(IFGEO_TEST_DATA) + "/" + name; }

}  // namespace ifgeo::testing
