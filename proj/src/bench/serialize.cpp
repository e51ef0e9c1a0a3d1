#include "ifgeo/bench/serialize.hpp"

#include <fstream>
#include <sstream>

#include "ifgeo/errors.hpp"

namespace ifgeo {

using nlohmann::json;

void to_json(json& j, const Document& d) {
    j = {{"doc_id", d.doc_id}, {"body", d.body}};
    if (d.origin_rank) j["origin_rank"] = *d.origin_rank;
}

void from_json(const json& j, Document& d) {
    d.doc_id = j.at("doc_id").get<std::string>();
    d.body = j.at("body").get<std::string>();
    d.origin_rank.reset();
    if (auto it = j.find("origin_rank"); it != j.end() && !it->is_null()) d.origin_rank = it->get<int>();
}

void to_json(json& j, const WeightedQuery& q) { j = {{"text", q.text}, {"weight", q.weight}}; }

void from_json(const json& j, WeightedQuery& q) {
    q.text = j.at("text").get<std::string>();
    q.weight = j.at("weight").get<int>();
}

void to_json(json& j, const QuerySet& qs) { j = {{"doc_id", qs.doc_id}, {"entries", qs.entries}}; }

void from_json(const json& j, QuerySet& qs) {
    qs.doc_id = j.at("doc_id").get<std::string>();
    qs.entries = j.at("entries").get<std::vector<WeightedQuery>>();
}

void to_json(json& j, const EditRequest& r) {
    j = {
        {"query_index", r.query_index},
        {"request_index", r.request_index},
        {"excerpt", r.excerpt},
        {"suggestion", r.suggestion},
        {"necessity", r.necessity},
        {"global_priority", r.global_priority},
        {"anchor",
         {{"offset", r.anchor.offset},
          {"length", r.anchor.length},
          {"similarity", r.anchor.similarity},
          {"locatable", r.anchor.locatable}}},
    };
}

void from_json(const json& j, EditRequest& r) {
    r.query_index = j.at("query_index").get<std::size_t>();
    r.request_index = j.at("request_index").get<std::size_t>();
    r.excerpt = j.at("excerpt").get<std::string>();
    r.suggestion = j.at("suggestion").get<std::string>();
    r.necessity = j.at("necessity").get<int>();
    r.global_priority = j.value("global_priority", 0.0);
    if (auto it = j.find("anchor"); it != j.end()) {
        r.anchor.offset = it->value("offset", std::size_t{0});
        r.anchor.length = it->value("length", std::size_t{0});
        r.anchor.similarity = it->value("similarity", 0.0);
        r.anchor.locatable = it->value("locatable", false);
    }
}

void to_json(json& j, const FusedInstruction& f) {
    json prov = json::array();
    for (const auto& p : f.provenance) prov.push_back({p.query_index, p.request_index});
    j = {
        {"id", f.id},
        {"topic", f.topic},
        {"excerpt", f.excerpt},
        {"suggestion", f.suggestion},
        {"necessity", f.necessity},
        {"priority", f.priority},
        {"provenance", std::move(prov)},
        {"resolution", resolution_name(f.resolution)},
    };
}

void from_json(const json& j, FusedInstruction& f) {
    f.id = j.at("id").get<std::string>();
    f.topic = j.at("topic").get<std::string>();
    f.excerpt = j.at("excerpt").get<std::string>();
    f.suggestion = j.at("suggestion").get<std::string>();
    f.necessity = j.at("necessity").get<int>();
    f.priority = j.value("priority", 0.0);
    f.provenance.clear();
    for (const auto& p : j.at("provenance")) f.provenance.push_back({p.at(0).get<std::size_t>(), p.at(1).get<std::size_t>()});
    const auto res = resolution_from_name(j.at("resolution").get<std::string>());
    if (!res) throw FormatError(0, "unknown resolution '" + j.at("resolution").get<std::string>() + "'");
    f.resolution = *res;
}

void to_json(json& j, const BlueprintItem& item) {
    j = {
        {"section_name", item.section_name},
        {"target_location", item.target_location},
        {"modification_intent", item.modification_intent},
        {"directives", item.directives},
        {"format_note", item.format_note},
        {"instruction_ids", item.instruction_ids},
    };
    j["resolved_section"] = item.resolved_section ? json(*item.resolved_section) : json(nullptr);
}

void from_json(const json& j, BlueprintItem& item) {
    item.section_name = j.at("section_name").get<std::string>();
    item.target_location = j.at("target_location").get<std::string>();
    item.modification_intent = j.at("modification_intent").get<std::string>();
    item.directives = j.at("directives").get<std::vector<std::string>>();
    item.format_note = j.at("format_note").get<std::string>();
    item.instruction_ids = j.value("instruction_ids", std::vector<std::string>{});
    item.resolved_section.reset();
    if (auto it = j.find("resolved_section"); it != j.end() && !it->is_null()) {
        item.resolved_section = it->get<std::size_t>();
    }
}

void to_json(json& j, const Blueprint& bp) { j = {{"revision_blueprint", bp.items}}; }

void from_json(const json& j, Blueprint& bp) {
    bp.items = j.at("revision_blueprint").get<std::vector<BlueprintItem>>();
}

void to_json(json& j, const PipelineConfig& c) {
    json ablation = json::array();
    for (auto a : c.ablation) ablation.push_back(ablation_name(a));
    j = {
        {"n_queries", c.n_queries},
        {"n_suggestions", c.n_suggestions},
        {"tau", c.tau},
        {"temperature", c.temperature},
        {"ablation", std::move(ablation)},
        {"strict_preservation", c.strict_preservation},
    };
}

void from_json(const json& j, PipelineConfig& c) {
    c.n_queries = j.at("n_queries").get<int>();
    c.n_suggestions = j.at("n_suggestions").get<int>();
    c.tau = j.at("tau").get<double>();
    c.temperature = j.at("temperature").get<double>();
    c.ablation.clear();
    for (const auto& a : j.at("ablation")) {
        const auto parsed = ablation_from_name(a.get<std::string>());
        if (!parsed) throw FormatError(0, "unknown ablation '" + a.get<std::string>() + "'");
        c.ablation.insert(*parsed);
    }
    c.strict_preservation = j.value("strict_preservation", false);
}

json stage_tokens_json(const std::array<StageTokens, kStageCount>& tokens) {
    json j = json::object();
    for (auto s : kAllStages) {
        const auto& t = tokens[stage_slot(s)];
        j[std::string(stage_name(s))] = {{"prompt", t.prompt}, {"completion", t.completion}};
    }
    return j;
}

void to_json(json& j, const RunManifest& m) {
    std::int64_t total = 0;
    for (const auto& t : m.stage_tokens) total += t.total();
    j = {
        {"config", m.config},
        {"backend_id", m.backend_id},
        {"seed", m.seed},
        {"stage_tokens", stage_tokens_json(m.stage_tokens)},
        {"total_tokens", total},
        {"started_at", m.started_at},
        {"finished_at", m.finished_at},
        {"artifact_paths", m.artifact_paths},
        {"warnings", m.warnings},
        {"preservation_violations", m.preservation_violations},
        {"survival_rate", m.survival_rate},
        {"cache_hits", m.cache_hits},
    };
}

void from_json(const json& j, RunManifest& m) {
    m.config = j.at("config").get<PipelineConfig>();
    m.backend_id = j.at("backend_id").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.stage_tokens = {};
    for (auto s : kAllStages) {
        if (auto it = j.at("stage_tokens").find(std::string(stage_name(s))); it != j.at("stage_tokens").end()) {
            m.stage_tokens[stage_slot(s)] = {it->at("prompt").get<std::int64_t>(),
                                             it->at("completion").get<std::int64_t>()};
        }
    }
    m.started_at = j.value("started_at", std::string{});
    m.finished_at = j.value("finished_at", std::string{});
    m.artifact_paths = j.value("artifact_paths", std::vector<std::string>{});
    m.warnings = j.value("warnings", std::vector<std::string>{});
    m.preservation_violations = j.value("preservation_violations", std::vector<std::string>{});
    m.survival_rate = j.value("survival_rate", 0.0);
    m.cache_hits = j.value("cache_hits", std::size_t{0});
}

void to_json(json& j, const PipelineArtifacts& a) {
    j = {
        {"query_set", a.query_set},
        {"raw_pool", a.raw_pool},
        {"filtered", a.filtered},
        {"fused", a.fused},
        {"revised", a.revised},
        {"manifest", a.manifest},
    };
    j["blueprint"] = a.blueprint ? json(*a.blueprint) : json(nullptr);
}

}  // namespace ifgeo

namespace ifgeo::stability {

using nlohmann::json;

void to_json(json& j, const GainVector& g) {
    j = {{"doc_id", g.doc_id}, {"gains", g.gains}};
    if (g.weights) j["weights"] = *g.weights;
}

void from_json(const json& j, GainVector& g) {
    g.doc_id = j.at("doc_id").get<std::string>();
    g.gains = j.at("gains").get<std::vector<double>>();
    g.weights.reset();
    if (auto it = j.find("weights"); it != j.end()) g.weights = it->get<std::vector<double>>();
}

void to_json(json& j, const StabilityReport& r) {
    j = {
        {"mean", r.mean}, {"variance", r.variance},         {"wcp", r.wcp},     {"wtr", r.wtr},
        {"dr", r.dr},     {"per_document", r.per_document}, {"count", r.count},
    };
}

void from_json(const json& j, StabilityReport& r) {
    r.mean = j.at("mean").get<double>();
    r.variance = j.at("variance").get<double>();
    r.wcp = j.at("wcp").get<double>();
    r.wtr = j.at("wtr").get<double>();
    r.dr = j.at("dr").get<double>();
    r.per_document = j.at("per_document").get<bool>();
    r.count = j.at("count").get<std::size_t>();
}

void to_json(json& j, const PopulationStats& s) {
    j = {{"mean", s.mean}, {"p_negative", s.p_negative}, {"dm", s.dm}, {"count", s.count}};
}

void from_json(const json& j, PopulationStats& s) {
    s.mean = j.at("mean").get<double>();
    s.p_negative = j.at("p_negative").get<double>();
    s.dm = j.at("dm").get<double>();
    s.count = j.at("count").get<std::size_t>();
}

void to_json(json& j, const CompetitionReport& r) {
    j = {{"target", r.target}, {"non_target", r.non_target}, {"spillover", r.spillover}};
}

void from_json(const json& j, CompetitionReport& r) {
    r.target = j.at("target").get<PopulationStats>();
    r.non_target = j.at("non_target").get<PopulationStats>();
    r.spillover = j.at("spillover").get<PopulationStats>();
}

}  // namespace ifgeo::stability

namespace ifgeo::engine {

void to_json(nlohmann::json& j, const EngineResponse& r) {
    nlohmann::json sentences = nlohmann::json::array();
    for (const auto& s : r.sentences) {
        sentences.push_back({{"text", s.text}, {"word_count", s.word_count}, {"cited", s.cited}});
    }
    j = {
        {"query", r.query},
        {"text", r.text},
        {"sentences", std::move(sentences)},
        {"source_count", r.source_count},
        {"dropped_citations", r.dropped_citations},
        {"warnings", r.warnings},
    };
}

}  // namespace ifgeo::engine

namespace ifgeo::bench {

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    write_text(path, j.dump(2) + "\n");
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp);
        out << text;
    }
    std::filesystem::rename(tmp, path);
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("missing artifact " + path.string());
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw MissingArtifact("unreadable artifact " + path.string());
    return j;
}

}  // namespace ifgeo::bench
