#include "ifgeo/llm/structured.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "ifgeo/errors.hpp"
#include "ifgeo/text.hpp"

namespace ifgeo::llm {

using nlohmann::json;

std::string strip_code_fences(std::string_view raw) {
    auto s = text::trim(raw);
    if (s.substr(0, 3) != "```") return std::string(raw);
    const auto first_nl = s.find('\n');
    if (first_nl == std::string_view::npos) return {};
    s.remove_prefix(first_nl + 1);
    const auto tail = text::trim(s);
    if (tail.size() >= 3 && tail.substr(tail.size() - 3) == "```") {
        const auto close = s.rfind("```");
        s = s.substr(0, close);
    }
    // Only the trailing newline that preceded the closing fence belongs to it.
    if (!s.empty() && s.back() == '\n') s.remove_suffix(1);
    return std::string(s);
}

namespace {

/// End (exclusive) of the balanced bracket group starting at `start`, or
/// npos when brackets mismatch or the text ends first.
std::size_t balanced_end(std::string_view s, std::size_t start) {
    std::string closers;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        switch (c) {
            case '"': in_string = true; break;
            case '{': closers.push_back('}'); break;
            case '[': closers.push_back(']'); break;
            case '}':
            case ']':
                if (closers.empty() || closers.back() != c) return std::string_view::npos;
                closers.pop_back();
                if (closers.empty()) return i + 1;
                break;
            default: break;
        }
    }
    return std::string_view::npos;
}

/// Calls `visit` on each balanced, parseable JSON candidate in order until it
/// returns true. Returns whether any candidate parsed at all.
template <typename Visit>
bool scan_json(std::string_view raw, Visit&& visit) {
    bool any = false;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const char c = raw[i];
        if (c != '{' && c != '[') continue;
        const auto end = balanced_end(raw, i);
        if (end == std::string_view::npos) continue;
        auto parsed = json::parse(raw.substr(i, end - i), nullptr, /*allow_exceptions=*/false);
        if (parsed.is_discarded()) continue;
        any = true;
        if (visit(parsed)) return true;
    }
    return any;
}

std::string describe(const json& v) {
    switch (v.type()) {
        case json::value_t::null: return "null";
        case json::value_t::boolean: return "boolean";
        case json::value_t::string: return "string";
        case json::value_t::array: return "array";
        case json::value_t::object: return "object";
        case json::value_t::discarded: return "discarded";
        default: return "number";
    }
}

class Validator {
public:
    explicit Validator(std::vector<std::string>& warnings) : warnings_(warnings) {}

    const json& field(const json& obj, std::string_view name, const std::string& path) const {
        if (!obj.is_object()) throw SchemaError(path, "expected object, got " + describe(obj));
        auto it = obj.find(std::string(name));
        if (it == obj.end()) throw SchemaError(path + "." + std::string(name), "missing field");
        return *it;
    }

    std::string string_field(const json& obj, std::string_view name, const std::string& path,
                             bool allow_empty = false) const {
        const auto p = path + "." + std::string(name);
        const auto& v = field(obj, name, path);
        if (!v.is_string()) throw SchemaError(p, "expected string, got " + describe(v));
        auto s = v.get<std::string>();
        if (!allow_empty && text::trim(s).empty()) throw SchemaError(p, "empty string");
        return s;
    }

    double score(const json& v, const std::string& path, double lo, double hi) const {
        if (!v.is_number()) throw SchemaError(path, "expected number, got " + describe(v));
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw SchemaError(path, "non-finite number");
        const double clamped = std::clamp(x, lo, hi);
        if (clamped != x) {
            std::ostringstream os;
            os << "clamped " << path << " from " << x << " to " << clamped;
            warnings_.push_back(os.str());
        }
        return clamped;
    }

    const json& array_field(const json& obj, std::string_view name, const std::string& path) const {
        const auto& v = field(obj, name, path);
        if (!v.is_array()) {
            throw SchemaError(path + "." + std::string(name), "expected array, got " + describe(v));
        }
        return v;
    }

private:
    std::vector<std::string>& warnings_;
};

bool is_object_list(const json& v) {
    return v.is_array() && std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_object(); });
}

json expect_array_payload(std::string_view raw, std::vector<std::string>& warnings) {
    std::optional<json> found;
    const bool any = scan_json(raw, [&](const json& v) {
        if (is_object_list(v)) {
            found = v;
            return true;
        }
        if (!v.is_object()) return false;
        for (auto& [k, member] : v.items()) {
            if (is_object_list(member)) {
                warnings.push_back("unwrapped list from enclosing object field '" + k + "'");
                found = member;
                return true;
            }
        }
        return false;
    });
    if (found) return *found;
    if (any) throw SchemaError("$", "expected a JSON list of objects");
    throw ParseError("no JSON payload found in completion");
}

// First object carrying `key`, else the first object at all (so the schema
// error names the missing field).
json expect_object_payload(std::string_view raw, std::string_view key) {
    std::optional<json> found, first;
    const bool any = scan_json(raw, [&](const json& v) {
        if (!v.is_object()) return false;
        if (!first) first = v;
        if (!v.contains(std::string(key))) return false;
        found = v;
        return true;
    });
    if (found) return *found;
    if (first) return *first;
    if (any) throw SchemaError("$", "expected a JSON object");
    throw ParseError("no JSON payload found in completion");
}

}  // namespace

json find_first_json(std::string_view raw) {
    std::optional<json> found;
    scan_json(raw, [&](const json& v) {
        found = v;
        return true;
    });
    if (found) return *found;
    throw ParseError("no JSON payload found in completion");
}

StructuredPayload extract_structured(std::string_view raw, Stage stage) {
    StructuredPayload out;
    Validator val(out.warnings);
    const auto body = strip_code_fences(raw);

    switch (stage) {
        case Stage::revise:
        case Stage::heuristic:
        case Stage::engine: {
            if (text::trim(body).empty()) throw ParseError("empty text completion");
            out.value = body;
            return out;
        }
        default: break;
    }
    if (text::trim(raw).empty()) throw ParseError("empty completion");

    switch (stage) {
        case Stage::mining: {
            auto obj = expect_object_payload(body, "queries");
            const auto& qs = val.array_field(obj, "queries", "$");
            json clean = json::array();
            for (std::size_t i = 0; i < qs.size(); ++i) {
                const auto p = "$.queries[" + std::to_string(i) + "]";
                clean.push_back({
                    {"query", val.string_field(qs[i], "query", p)},
                    {"probability", val.score(val.field(qs[i], "probability", p), p + ".probability", 0, 100)},
                });
            }
            out.value = {{"queries", std::move(clean)}};
            break;
        }
        case Stage::request_gen: {
            auto obj = expect_object_payload(body, "suggestions");
            const auto& ss = val.array_field(obj, "suggestions", "$");
            json clean = json::array();
            for (std::size_t i = 0; i < ss.size(); ++i) {
                const auto p = "$.suggestions[" + std::to_string(i) + "]";
                clean.push_back({
                    {"excerpt", val.string_field(ss[i], "excerpt", p)},
                    {"suggestion", val.string_field(ss[i], "suggestion", p)},
                    {"necessity", val.score(val.field(ss[i], "necessity", p), p + ".necessity", 0, 100)},
                });
            }
            out.value = {{"suggestions", std::move(clean)}};
            break;
        }
        case Stage::dedup: {
            auto arr = expect_array_payload(body, out.warnings);
            json clean = json::array();
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const auto p = "$[" + std::to_string(i) + "]";
                clean.push_back({
                    {"id", val.string_field(arr[i], "id", p)},
                    {"topic", val.string_field(arr[i], "topic", p, /*allow_empty=*/true)},
                    {"excerpt", val.string_field(arr[i], "excerpt", p)},
                    {"suggestion", val.string_field(arr[i], "suggestion", p)},
                    {"necessity", val.score(val.field(arr[i], "necessity", p), p + ".necessity", 0, 100)},
                });
            }
            out.value = std::move(clean);
            break;
        }
        case Stage::conflict: {
            auto arr = expect_array_payload(body, out.warnings);
            json clean = json::array();
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const auto p = "$[" + std::to_string(i) + "]";
                json item{
                    {"id", val.string_field(arr[i], "id", p)},
                    {"excerpt", val.string_field(arr[i], "excerpt", p)},
                    {"suggestion", val.string_field(arr[i], "suggestion", p)},
                };
                if (arr[i].is_object() && arr[i].contains("necessity")) {
                    item["necessity"] = val.score(arr[i]["necessity"], p + ".necessity", 0, 100);
                }
                clean.push_back(std::move(item));
            }
            out.value = std::move(clean);
            break;
        }
        case Stage::blueprint: {
            auto obj = expect_object_payload(body, "revision_blueprint");
            const auto& items = val.array_field(obj, "revision_blueprint", "$");
            json clean = json::array();
            for (std::size_t i = 0; i < items.size(); ++i) {
                const auto p = "$.revision_blueprint[" + std::to_string(i) + "]";
                const auto& dirs = val.array_field(items[i], "directives", p);
                json clean_dirs = json::array();
                for (std::size_t d = 0; d < dirs.size(); ++d) {
                    if (!dirs[d].is_string()) {
                        throw SchemaError(p + ".directives[" + std::to_string(d) + "]",
                                          "expected string, got " + describe(dirs[d]));
                    }
                    clean_dirs.push_back(dirs[d]);
                }
                clean.push_back({
                    {"section_name", val.string_field(items[i], "section_name", p)},
                    {"target_location", val.string_field(items[i], "target_location", p, true)},
                    {"modification_intent", val.string_field(items[i], "modification_intent", p, true)},
                    {"directives", std::move(clean_dirs)},
                    {"format_note", val.string_field(items[i], "format_note", p, true)},
                });
            }
            out.value = {{"revision_blueprint", std::move(clean)}};
            break;
        }
        case Stage::judge: {
            auto obj = expect_object_payload(body, kJudgeDimensions.front());
            json clean = json::object();
            for (auto dim : kJudgeDimensions) {
                const std::string name(dim);
                clean[name] = val.score(val.field(obj, name, "$"), "$." + name, 1, 5);
            }
            out.value = std::move(clean);
            break;
        }
        default: break;
    }
    return out;
}

}  // namespace ifgeo::llm
