#include "ifgeo/prompts.hpp"

#include <algorithm>
#include <map>

#include "ifgeo/errors.hpp"
#include "prompts_embedded.hpp"

namespace ifgeo::prompts {

using nlohmann::json;

std::string_view asset(std::string_view name) {
    for (const auto& a : detail::kEmbeddedAssets) {
        if (a.name == name) return a.text;
    }
    throw ConfigError("unknown prompt asset '" + std::string(name) + "'");
}

std::vector<std::string_view> asset_names() {
    std::vector<std::string_view> names;
    for (const auto& a : detail::kEmbeddedAssets) names.push_back(a.name);
    return names;
}

std::string render(std::string_view tmpl, const std::vector<std::pair<std::string_view, std::string>>& vars) {
    std::string out(tmpl);
    for (const auto& [name, value] : vars) {
        const auto needle = "{" + std::string(name) + "}";
        for (auto pos = out.find(needle); pos != std::string::npos; pos = out.find(needle, pos + value.size())) {
            out.replace(pos, needle.size(), value);
        }
    }
    return out;
}

namespace {

llm::PromptSpec make(Stage stage, std::string system, std::string user, double temperature, int max_tokens) {
    llm::PromptSpec spec;
    spec.stage = stage;
    spec.system_text = std::move(system);
    spec.user_text = std::move(user);
    spec.temperature = temperature;
    spec.max_tokens = max_tokens;
    return spec;
}

}  // namespace

json instructions_payload(const std::vector<FusedInstruction>& items, bool with_priority) {
    json arr = json::array();
    for (const auto& it : items) {
        json j{
            {"id", it.id},
            {"topic", it.topic},
            {"excerpt", it.excerpt},
            {"suggestion", it.suggestion},
            {"necessity", it.necessity},
        };
        if (with_priority) j["priority"] = it.priority;
        arr.push_back(std::move(j));
    }
    return arr;
}

json blueprint_payload(const Blueprint& bp) {
    json items = json::array();
    for (const auto& it : bp.items) {
        items.push_back({
            {"section_name", it.section_name},
            {"target_location", it.target_location},
            {"modification_intent", it.modification_intent},
            {"directives", it.directives},
            {"format_note", it.format_note},
        });
    }
    return {{"revision_blueprint", std::move(items)}};
}

llm::PromptSpec mining(const Document& doc, int n_queries, double temperature) {
    return make(Stage::mining, render(asset("mining"), {{"num_queries", std::to_string(n_queries)}}),
                std::string(kWebpage) + doc.body, temperature, kJsonMaxTokens);
}

llm::PromptSpec request_generation(const Document& doc, std::string_view query, int n_suggestions,
                                   double temperature) {
    std::string user;
    user += kQuery;
    user += query;
    user += "\n\n";
    user += kWebpage;
    user += doc.body;
    return make(Stage::request_gen,
                render(asset("request_gen"), {{"suggestions_num", std::to_string(n_suggestions)}}),
                std::move(user), temperature, kJsonMaxTokens);
}

llm::PromptSpec deduplication(const QuerySet& qs, const std::vector<EditRequest>& pool, double temperature) {
    std::map<std::size_t, json> groups;
    for (const auto& r : pool) {
        auto& g = groups[r.query_index];
        if (g.is_null()) {
            g = {
                {"query", r.query_index < qs.entries.size() ? qs.entries[r.query_index].text : std::string{}},
                {"weight", r.query_index < qs.entries.size() ? qs.entries[r.query_index].weight : 0},
                {"suggestions", json::array()},
            };
        }
        g["suggestions"].push_back({
            {"excerpt", r.excerpt},
            {"suggestion", r.suggestion},
            {"necessity", r.necessity},
            {"priority", r.global_priority},
        });
    }
    json arr = json::array();
    for (auto& [idx, g] : groups) arr.push_back(std::move(g));
    return make(Stage::dedup, std::string(asset("dedup")), std::string(kGroupedSuggestions) + arr.dump(2),
                temperature, kJsonMaxTokens);
}

llm::PromptSpec conflict_resolution(const std::vector<FusedInstruction>& items, double temperature) {
    return make(Stage::conflict, std::string(asset("conflict")),
                std::string(kSuggestions) + instructions_payload(items, true).dump(2), temperature,
                kJsonMaxTokens);
}

llm::PromptSpec blueprint(const Document& doc, const std::vector<FusedInstruction>& items, double temperature) {
    std::string user;
    user += kWebpage;
    user += doc.body;
    user += "\n\n";
    user += kInstructions;
    user += instructions_payload(items, false).dump(2);
    return make(Stage::blueprint, std::string(asset("blueprint")), std::move(user), temperature, kJsonMaxTokens);
}

llm::PromptSpec revision(const Document& doc, const Blueprint& bp, double temperature) {
    std::string user;
    user += kWebpage;
    user += doc.body;
    user += "\n\n";
    user += kBlueprint;
    user += blueprint_payload(bp).dump(2);
    return make(Stage::revise, std::string(asset("revise")), std::move(user), temperature, kRewriteMaxTokens);
}

llm::PromptSpec flat_revision(const Document& doc, const std::vector<FusedInstruction>& items,
                              double temperature) {
    std::string user;
    user += kWebpage;
    user += doc.body;
    user += "\n\n";
    user += kFlatInstructions;
    user += instructions_payload(items, false).dump(2);
    return make(Stage::revise, std::string(asset("revise_flat")), std::move(user), temperature,
                kRewriteMaxTokens);
}

llm::PromptSpec answer_synthesis(std::string_view query, const std::vector<Document>& sources,
                                 double temperature) {
    std::string user;
    user += kQuestion;
    user += query;
    user += "\n\nSources:\n\n";
    for (std::size_t k = 0; k < sources.size(); ++k) {
        user += kSourceOpen;
        user += std::to_string(k + 1);
        user += kSourceClose;
        user += sources[k].body;
        user += "\n\n";
    }
    return make(Stage::engine,
                render(asset("engine_answer"), {{"num_sources", std::to_string(sources.size())}}),
                std::move(user), temperature, kJsonMaxTokens);
}

llm::PromptSpec judge(std::string_view query, const Document& doc, std::size_t source_number,
                      std::string_view answer, double temperature) {
    std::string user;
    user += kJudgeQuery;
    user += query;
    user += "\n\n";
    user += kJudgeTarget;
    user += std::to_string(source_number);
    user += "]\n\n";
    user += kJudgeSourceText;
    user += doc.body;
    user += "\n\n";
    user += kJudgeAnswer;
    user += answer;
    return make(Stage::judge, std::string(asset("judge")), std::move(user), temperature, 512);
}

llm::PromptSpec heuristic(const Document& doc, std::string_view strategy, double temperature) {
    return make(Stage::heuristic, std::string(asset("heuristic_" + std::string(strategy))),
                std::string(kWebpage) + doc.body, temperature, kRewriteMaxTokens);
}

}  // namespace ifgeo::prompts
