#include "ifgeo/model.hpp"

#include <chrono>
#include <ctime>
#include <numeric>

#include "ifgeo/errors.hpp"

namespace ifgeo {

void validate(const Document& doc) {
    if (doc.doc_id.empty()) throw InvariantError("document without doc_id");
    if (doc.body.empty()) throw InvariantError("document '" + doc.doc_id + "' has an empty body");
    if (doc.origin_rank && (*doc.origin_rank < 1 || *doc.origin_rank > 5)) {
        throw InvariantError("document '" + doc.doc_id + "' origin_rank outside 1..5");
    }
}

namespace {

struct Line {
    std::size_t begin;
    std::size_t end;  // excludes the newline
};

std::optional<std::string> atx_heading(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::size_t hashes = 0;
    while (hashes < line.size() && line[hashes] == '#') ++hashes;
    if (hashes < 1 || hashes > 6) return std::nullopt;
    if (hashes >= line.size() || (line[hashes] != ' ' && line[hashes] != '\t')) return std::nullopt;

    auto content = text::trim(line.substr(hashes + 1));
    // Optional closing sequence: " ##"
    std::size_t e = content.size();
    while (e > 0 && content[e - 1] == '#') --e;
    if (e < content.size() && (e == 0 || content[e - 1] == ' ' || content[e - 1] == '\t')) {
        content = text::trim(content.substr(0, e));
    }
    return std::string(content);
}

/// Returns the fence marker ("```" or "~~~" of some length) if the line
/// opens or closes a fenced block.
std::string_view fence_marker(std::string_view line) {
    std::size_t indent = 0;
    while (indent < line.size() && indent < 3 && line[indent] == ' ') ++indent;
    line.remove_prefix(indent);
    if (line.empty() || (line[0] != '`' && line[0] != '~')) return {};
    std::size_t n = 0;
    while (n < line.size() && line[n] == line[0]) ++n;
    return n >= 3 ? line.substr(0, n) : std::string_view{};
}

}  // namespace

SectionIndex index_sections(std::string_view body) {
    std::vector<Line> lines;
    for (std::size_t pos = 0; pos < body.size();) {
        auto nl = body.find('\n', pos);
        const std::size_t end = nl == std::string_view::npos ? body.size() : nl;
        lines.push_back({pos, end});
        pos = nl == std::string_view::npos ? body.size() : nl + 1;
    }

    SectionIndex index;
    std::string_view open_fence;
    for (const auto& ln : lines) {
        const auto line = body.substr(ln.begin, ln.end - ln.begin);
        if (auto marker = fence_marker(line); !marker.empty()) {
            if (open_fence.empty()) {
                open_fence = marker;
            } else if (marker[0] == open_fence[0] && marker.size() >= open_fence.size()) {
                open_fence = {};
            }
            continue;
        }
        if (!open_fence.empty()) continue;
        if (auto heading = atx_heading(line)) {
            if (index.sections.empty() && ln.begin > 0) {
                index.sections.push_back({std::nullopt, 0, ln.begin});
            }
            if (!index.sections.empty()) index.sections.back().end = ln.begin;
            index.sections.push_back({std::move(heading), ln.begin, body.size()});
        }
    }
    if (index.sections.empty()) index.sections.push_back({std::nullopt, 0, body.size()});
    index.sections.back().end = body.size();
    return index;
}

std::size_t SectionIndex::section_at(std::size_t offset) const {
    for (std::size_t i = 0; i < sections.size(); ++i) {
        if (offset < sections[i].end) return i;
    }
    return sections.empty() ? 0 : sections.size() - 1;
}

std::optional<std::size_t> SectionIndex::find_by_name(std::string_view name) const {
    const auto wanted = text::trim(name);
    for (std::size_t i = 0; i < sections.size(); ++i) {
        if (sections[i].heading && *sections[i].heading == wanted) return i;
    }
    const auto norm = text::normalize(wanted);
    if (norm.empty()) return std::nullopt;
    for (std::size_t i = 0; i < sections.size(); ++i) {
        if (sections[i].heading && text::normalize(*sections[i].heading) == norm) return i;
    }
    static constexpr std::array<std::string_view, 8> preamble_aliases{
        "preamble", "introduction", "intro", "opening", "lead",
        "opening paragraph", "lead paragraph", "opening section",
    };
    if (!sections.empty() && sections.front().is_preamble()) {
        for (auto alias : preamble_aliases) {
            if (norm == alias) return 0;
        }
    }
    return std::nullopt;
}

std::string_view resolution_name(Resolution r) {
    switch (r) {
        case Resolution::kept: return "kept";
        case Resolution::merged: return "merged";
        case Resolution::selected: return "selected";
        case Resolution::synthesized: return "synthesized";
    }
    return "kept";
}

std::optional<Resolution> resolution_from_name(std::string_view name) {
    for (auto r : {Resolution::kept, Resolution::merged, Resolution::selected, Resolution::synthesized}) {
        if (resolution_name(r) == name) return r;
    }
    return std::nullopt;
}

EditIntent classify_intent(std::string_view suggestion) {
    static constexpr std::string_view kReduce[] = {"delete", "remove", "shorten", "condense", "simplify",
                                                   "cut", "trim", "drop", "omit"};
    static constexpr std::string_view kExpand[] = {"expand", "add", "elaborate", "extend", "include",
                                                   "insert", "introduce", "append"};
    // The first directional verb decides.
    for (const auto& tok : text::tokenize(suggestion)) {
        for (auto v : kReduce) {
            if (tok == v || tok == std::string(v) + "s") return EditIntent::reduce;
        }
        for (auto v : kExpand) {
            if (tok == v || tok == std::string(v) + "s") return EditIntent::expand;
        }
    }
    return EditIntent::neutral;
}

bool intents_conflict(EditIntent a, EditIntent b) {
    return (a == EditIntent::reduce && b == EditIntent::expand) ||
           (a == EditIntent::expand && b == EditIntent::reduce);
}

std::string_view ablation_name(Ablation a) {
    switch (a) {
        case Ablation::no_blueprint: return "no_blueprint";
        case Ablation::no_fusion: return "no_fusion";
        case Ablation::no_conflict_res: return "no_conflict_res";
    }
    return "";
}

std::optional<Ablation> ablation_from_name(std::string_view name) {
    for (auto a : {Ablation::no_blueprint, Ablation::no_fusion, Ablation::no_conflict_res}) {
        if (ablation_name(a) == name) return a;
    }
    return std::nullopt;
}

void validate(const PipelineConfig& cfg) {
    if (cfg.n_queries < 1) throw ConfigError("n_queries must be >= 1");
    if (cfg.n_suggestions < 1) throw ConfigError("n_suggestions must be >= 1");
    if (!(cfg.tau >= 0.0 && cfg.tau <= 1.0)) throw ConfigError("tau must lie in [0,1]");
    if (!(cfg.temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
}

std::int64_t RunManifest::total_tokens() const noexcept {
    return std::accumulate(stage_tokens.begin(), stage_tokens.end(), std::int64_t{0},
                           [](std::int64_t acc, const StageTokens& t) { return acc + t.total(); });
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace ifgeo
