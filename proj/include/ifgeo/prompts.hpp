#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ifgeo/llm/gateway.hpp"
#include "ifgeo/model.hpp"

namespace ifgeo::prompts {

/// Bumped whenever any template under assets/prompts changes meaning.
inline constexpr std::string_view kVersion = "1";

/// Embedded template text by asset name (file stem). Throws ConfigError.
std::string_view asset(std::string_view name);
std::vector<std::string_view> asset_names();

/// Replaces each `{name}` placeholder.
std::string render(std::string_view tmpl,
                   const std::vector<std::pair<std::string_view, std::string>>& vars);

// Section markers of the user messages. The mock backend reads prompts back
// through these, so builders and parsers must agree on them.
inline constexpr std::string_view kWebpage = "Webpage content:\n";
inline constexpr std::string_view kQuery = "User query:\n";
inline constexpr std::string_view kGroupedSuggestions = "Revision suggestions grouped by user query (JSON):\n";
inline constexpr std::string_view kSuggestions = "Suggestions (JSON):\n";
inline constexpr std::string_view kInstructions = "Logic-checked revision instructions (JSON):\n";
inline constexpr std::string_view kBlueprint = "Revision Blueprint (JSON):\n";
inline constexpr std::string_view kFlatInstructions = "Revision instructions (JSON):\n";
inline constexpr std::string_view kQuestion = "Question: ";
inline constexpr std::string_view kSourceOpen = "=== Source [";
inline constexpr std::string_view kSourceClose = "] ===\n";
inline constexpr std::string_view kJudgeQuery = "Query: ";
inline constexpr std::string_view kJudgeTarget = "Target source: [";
inline constexpr std::string_view kJudgeSourceText = "Target source text:\n";
inline constexpr std::string_view kJudgeAnswer = "Generated answer:\n";

inline constexpr int kJsonMaxTokens = 2048;
inline constexpr int kRewriteMaxTokens = 4096;

llm::PromptSpec mining(const Document& doc, int n_queries, double temperature);
llm::PromptSpec request_generation(const Document& doc, std::string_view query, int n_suggestions,
                                   double temperature);
llm::PromptSpec deduplication(const QuerySet& qs, const std::vector<EditRequest>& pool, double temperature);
llm::PromptSpec conflict_resolution(const std::vector<FusedInstruction>& items, double temperature);
llm::PromptSpec blueprint(const Document& doc, const std::vector<FusedInstruction>& items, double temperature);
llm::PromptSpec revision(const Document& doc, const Blueprint& bp, double temperature);
llm::PromptSpec flat_revision(const Document& doc, const std::vector<FusedInstruction>& items,
                              double temperature);
llm::PromptSpec answer_synthesis(std::string_view query, const std::vector<Document>& sources,
                                 double temperature);
llm::PromptSpec judge(std::string_view query, const Document& doc, std::size_t source_number,
                      std::string_view answer, double temperature);
llm::PromptSpec heuristic(const Document& doc, std::string_view strategy, double temperature);

/// The blueprint as the planner emits it (no resolution fields).
nlohmann::json blueprint_payload(const Blueprint& bp);
/// Instructions as shown to the conflict, blueprint, and flat-edit stages.
nlohmann::json instructions_payload(const std::vector<FusedInstruction>& items, bool with_priority);

}  // namespace ifgeo::prompts
