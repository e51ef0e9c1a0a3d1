#include "ifgeo/llm/mock_backend.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <regex>
#include <unordered_map>
#include <unordered_set>

#include "ifgeo/errors.hpp"
#include "ifgeo/llm/structured.hpp"
#include "ifgeo/model.hpp"
#include "ifgeo/prompts.hpp"
#include "ifgeo/text.hpp"

namespace ifgeo::llm {

using nlohmann::json;

std::uint64_t SplitMix64::next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

int SplitMix64::between(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo + 1);
    return lo + static_cast<int>(next() % span);
}

namespace {

// ---- prompt readers ------------------------------------------------------

std::string_view after(std::string_view s, std::string_view marker) {
    const auto pos = s.find(marker);
    if (pos == std::string_view::npos) throw BackendRefusal("mock: prompt lacks marker '" + std::string(marker) + "'");
    return s.substr(pos + marker.size());
}

/// Text between `open` and the last "\n\n<close>".
std::string_view between(std::string_view s, std::string_view open, std::string_view close) {
    auto rest = after(s, open);
    const auto end = rest.rfind("\n\n" + std::string(close));
    return end == std::string_view::npos ? rest : rest.substr(0, end);
}

json json_after(std::string_view s, std::string_view marker) {
    const auto pos = s.rfind(marker);
    if (pos == std::string_view::npos) throw BackendRefusal("mock: prompt lacks marker '" + std::string(marker) + "'");
    return find_first_json(s.substr(pos + marker.size()));
}

int number_in(std::string_view s, const std::regex& re, int fallback) {
    std::match_results<std::string_view::const_iterator> m;
    if (std::regex_search(s.begin(), s.end(), m, re)) return std::stoi(m[1].str());
    return fallback;
}

std::string strip_quotes(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c != '"') out.push_back(c);
    }
    return out;
}

/// Every "..." segment of a suggestion or directive: the text the mock
/// editor inserts.
std::vector<std::string> quoted_segments(std::string_view s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto open = s.find('"', pos);
        if (open == std::string_view::npos) break;
        const auto close = s.find('"', open + 1);
        if (close == std::string_view::npos) break;
        auto seg = text::trim(s.substr(open + 1, close - open - 1));
        if (!seg.empty()) out.emplace_back(seg);
        pos = close + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string fenced(const json& j) { return "```json\n" + j.dump(2) + "\n```"; }

// ---- document helpers ----------------------------------------------------

/// Distinct content terms of length >= 4, most frequent first, then by first
/// occurrence.
std::vector<std::string> salient_terms(std::string_view body) {
    std::vector<std::string> order;
    std::unordered_map<std::string, int> freq;
    for (const auto& t : text::content_terms(body)) {
        if (t.size() < 4 || std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); })) {
            continue;
        }
        if (freq[t]++ == 0) order.push_back(t);
    }
    std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) { return freq[a] > freq[b]; });
    return order;
}

struct Span {
    std::size_t begin;
    std::size_t end;
};

/// Prose sentences of a markdown body (headings and fenced code skipped).
std::vector<Span> prose_sentences(std::string_view body) {
    std::vector<Span> out;
    bool in_fence = false;
    std::size_t line_start = 0;
    while (line_start < body.size()) {
        auto line_end = body.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = body.size();
        const auto line = body.substr(line_start, line_end - line_start);
        const auto trimmed = text::trim(line);
        if (trimmed.starts_with("```") || trimmed.starts_with("~~~")) {
            in_fence = !in_fence;
        } else if (!in_fence && !trimmed.empty() && trimmed.front() != '#') {
            std::size_t s = line_start + static_cast<std::size_t>(trimmed.data() - line.data());
            for (std::size_t i = s; i < line_end; ++i) {
                const char c = body[i];
                const bool terminal = (c == '.' || c == '!' || c == '?') &&
                                      (i + 1 == line_end || body[i + 1] == ' ');
                if (terminal || i + 1 == line_end) {
                    const auto sent = text::trim(body.substr(s, i + 1 - s));
                    if (text::count_words(sent) >= 3) {
                        const auto b = static_cast<std::size_t>(sent.data() - body.data());
                        out.push_back({b, b + sent.size()});
                    }
                    s = i + 1;
                    while (s < line_end && body[s] == ' ') ++s;
                    i = s - 1;
                }
            }
        }
        line_start = line_end + 1;
    }
    return out;
}

/// Byte-exact prefix of a sentence holding at most `max_words` words.
std::string_view word_prefix(std::string_view s, std::size_t max_words) {
    std::size_t words = 0;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (i >= s.size()) break;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        if (++words == max_words) break;
    }
    return s.substr(0, i);
}

/// Inserts `addition` as a new paragraph after the last non-whitespace byte
/// of [begin, end); trailing whitespace of the section is kept.
void insert_paragraph(std::string& body, std::size_t begin, std::size_t end, const std::string& addition) {
    std::size_t pos = end;
    while (pos > begin && std::isspace(static_cast<unsigned char>(body[pos - 1]))) --pos;
    body.insert(pos, "\n\n" + addition);
}

struct PendingInsert {
    std::optional<std::size_t> section;  // none: append as a new section
    std::string new_heading;
    std::string text;
};

/// Applies inserts back to front so earlier section offsets stay valid.
std::string apply_inserts(std::string body, std::vector<PendingInsert> inserts) {
    const auto index = index_sections(body);
    std::map<std::size_t, std::vector<std::string>> by_section;
    std::vector<std::pair<std::string, std::vector<std::string>>> appended;
    for (auto& ins : inserts) {
        if (ins.text.empty()) continue;
        if (ins.section) {
            by_section[*ins.section].push_back(std::move(ins.text));
            continue;
        }
        auto it = std::find_if(appended.begin(), appended.end(),
                               [&](const auto& p) { return p.first == ins.new_heading; });
        if (it == appended.end()) {
            appended.push_back({ins.new_heading, {}});
            it = std::prev(appended.end());
        }
        it->second.push_back(std::move(ins.text));
    }
    std::string tail;
    for (const auto& [heading, texts] : appended) {
        tail += "\n\n## " + heading + "\n\n" + join(texts, " ");
    }
    if (!tail.empty()) {
        std::size_t pos = body.size();
        while (pos > 0 && std::isspace(static_cast<unsigned char>(body[pos - 1]))) --pos;
        body.insert(pos, tail);
    }
    for (auto it = by_section.rbegin(); it != by_section.rend(); ++it) {
        const auto& sec = index.sections[it->first];
        insert_paragraph(body, sec.begin, sec.end, join(it->second, " "));
    }
    return body;
}

// ---- stage handlers ------------------------------------------------------

std::string mine(const PromptSpec& spec, SplitMix64& rng) {
    static const std::regex kCount(R"(Generate (\d+) queries)");
    const int n = std::max(1, number_in(spec.system_text, kCount, 5));
    const auto body = after(spec.user_text, prompts::kWebpage);
    auto terms = salient_terms(body);
    if (terms.empty()) terms.push_back("topic");

    static constexpr std::string_view kTemplates[] = {
        "what is {a}",
        "how does {a} affect {b}",
        "difference between {a} and {b}",
        "{a} {b} explained",
        "common causes of {a}",
        "when to worry about {a}",
        "{a} risks and warning signs",
        "best way to manage {a}",
        "{a} versus {b} comparison",
    };
    json queries = json::array();
    std::vector<std::string> accepted;
    const std::size_t t_count = std::size(kTemplates);
    for (std::size_t attempt = 0; accepted.size() < static_cast<std::size_t>(n) && attempt < 200; ++attempt) {
        const auto& a = terms[(attempt / t_count) % terms.size()];
        const auto& b = terms[(attempt / t_count + 1 + attempt % 3) % terms.size()];
        std::string q;
        if (attempt < 120) {
            q = prompts::render(kTemplates[attempt % t_count], {{"a", a}, {"b", b}});
            if (a == b && q.find(a) != q.rfind(a)) continue;
        } else {
            q = a + " question " + std::to_string(attempt - 119);
        }
        const bool near_dup = std::any_of(accepted.begin(), accepted.end(),
                                          [&](const auto& prev) { return text::token_jaccard(prev, q) > 0.9; });
        if (near_dup) continue;
        accepted.push_back(q);
        queries.push_back({{"query", q}, {"probability", rng.between(60, 95)}});
    }
    return fenced({{"queries", std::move(queries)}});
}

std::string insertion_sentence(const std::string& query, std::size_t variant) {
    auto terms = text::content_terms(query);
    if (terms.empty()) terms.push_back(query);
    const auto t = join(terms, ", ");
    switch (variant % 5) {
        case 0: return "This section also answers " + query + ", covering " + t + ".";
        case 1: return "For readers asking " + query + ", the key points are " + t + ".";
        case 2: return "In short, " + query + " comes down to " + t + ".";
        case 3: return "A common question is " + query + "; it involves " + t + ".";
        default: return "Put simply, " + t + " are central to " + query + ".";
    }
}

std::string request_gen(const PromptSpec& spec, SplitMix64& rng) {
    static const std::regex kCount(R"(up to (\d+) revision)");
    const int n = std::max(0, number_in(spec.system_text, kCount, 5));
    const auto query = strip_quotes(text::trim(between(spec.user_text, prompts::kQuery, prompts::kWebpage)));
    const auto body = after(spec.user_text, prompts::kWebpage);
    const auto sentences = prose_sentences(body);

    const auto q_terms = text::content_terms(query);
    const std::unordered_set<std::string> q_set(q_terms.begin(), q_terms.end());
    std::vector<std::pair<int, std::size_t>> ranked;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        int overlap = 0;
        for (const auto& t : text::tokenize(body.substr(sentences[i].begin, sentences[i].end - sentences[i].begin))) {
            overlap += static_cast<int>(q_set.count(t));
        }
        ranked.push_back({overlap, i});
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

    json suggestions = json::array();
    for (std::size_t k = 0; k < ranked.size() && k < static_cast<std::size_t>(n); ++k) {
        const auto& span = sentences[ranked[k].second];
        const auto excerpt = word_prefix(body.substr(span.begin, span.end - span.begin), 12);
        const bool reduce = k > 0 && rng.between(0, 3) == 0;
        std::string suggestion =
            reduce ? "Condense this passage so it stays focused on " + query + "."
                   : "Add a sentence that addresses the query: \"" + insertion_sentence(query, k) + "\"";
        suggestions.push_back({
            {"excerpt", std::string(excerpt)},
            {"suggestion", std::move(suggestion)},
            {"necessity", rng.between(60, 95)},
        });
    }
    return fenced({{"suggestions", std::move(suggestions)}});
}

std::string topic_of(std::string_view excerpt) {
    auto terms = text::content_terms(excerpt);
    if (terms.size() > 3) terms.resize(3);
    return terms.empty() ? std::string("general") : join(terms, "-");
}

std::string dedup(const PromptSpec& spec) {
    const auto groups = json_after(spec.user_text, prompts::kGroupedSuggestions);
    struct Item {
        std::string excerpt;
        std::vector<std::string> suggestions;
        EditIntent intent;
        int necessity;
    };
    std::vector<Item> items;
    for (const auto& g : groups) {
        for (const auto& s : g.at("suggestions")) {
            const int necessity = static_cast<int>(std::lround(s.at("necessity").get<double>()));
            if (necessity < 60) continue;
            const auto excerpt = s.at("excerpt").get<std::string>();
            const auto suggestion = s.at("suggestion").get<std::string>();
            const auto intent = classify_intent(suggestion);
            auto it = std::find_if(items.begin(), items.end(), [&](const Item& x) {
                return x.intent == intent && text::normalize(x.excerpt) == text::normalize(excerpt);
            });
            if (it == items.end()) {
                items.push_back({excerpt, {suggestion}, intent, necessity});
            } else {
                if (std::find(it->suggestions.begin(), it->suggestions.end(), suggestion) == it->suggestions.end()) {
                    it->suggestions.push_back(suggestion);
                }
                it->necessity = std::max(it->necessity, necessity);
            }
        }
    }
    json out = json::array();
    for (std::size_t i = 0; i < items.size(); ++i) {
        out.push_back({
            {"id", "suggest_" + std::to_string(i + 1)},
            {"topic", topic_of(items[i].excerpt)},
            {"excerpt", items[i].excerpt},
            {"suggestion", join(items[i].suggestions, " ")},
            {"necessity", items[i].necessity},
        });
    }
    return fenced(out);
}

std::string conflict(const PromptSpec& spec) {
    const auto input = json_after(spec.user_text, prompts::kSuggestions);
    struct Item {
        json value;
        EditIntent intent;
        int necessity;
    };
    std::vector<Item> items;
    for (const auto& v : input) {
        items.push_back({v, classify_intent(v.at("suggestion").get<std::string>()),
                         static_cast<int>(std::lround(v.value("necessity", 0.0)))});
    }
    json out = json::array();
    std::vector<bool> done(items.size(), false);
    int synth = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (done[i]) continue;
        const auto anchor = text::normalize(items[i].value.at("excerpt").get<std::string>());
        std::vector<std::size_t> group;
        for (std::size_t j = i; j < items.size(); ++j) {
            if (!done[j] && text::normalize(items[j].value.at("excerpt").get<std::string>()) == anchor) {
                group.push_back(j);
            }
        }
        std::optional<std::size_t> best_reduce, best_expand;
        for (auto j : group) {
            if (items[j].intent == EditIntent::neutral) continue;
            auto& slot = items[j].intent == EditIntent::reduce ? best_reduce : best_expand;
            if (!slot || items[j].necessity > items[*slot].necessity) slot = j;
        }
        for (auto j : group) done[j] = true;
        if (!best_reduce || !best_expand) {
            for (auto j : group) out.push_back(items[j].value);
            continue;
        }
        const int gap = items[*best_reduce].necessity - items[*best_expand].necessity;
        if (std::abs(gap) >= 10) {
            const auto loser = gap > 0 ? EditIntent::expand : EditIntent::reduce;
            for (auto j : group) {
                if (items[j].intent != loser) out.push_back(items[j].value);
            }
            continue;
        }
        std::vector<std::string> additions;
        int necessity = 0;
        for (auto j : group) {
            necessity = std::max(necessity, items[j].necessity);
            if (items[j].intent == EditIntent::neutral) {
                out.push_back(items[j].value);
                continue;
            }
            for (auto& q : quoted_segments(items[j].value.at("suggestion").get<std::string>())) {
                additions.push_back("\"" + q + "\"");
            }
        }
        out.push_back({
            {"id", "synth_" + std::to_string(++synth)},
            {"topic", items[i].value.value("topic", std::string{})},
            {"excerpt", items[i].value.at("excerpt")},
            {"suggestion", "Keep this passage compact while adding only the essentials: " + join(additions, " ")},
            {"necessity", necessity},
        });
    }
    return fenced(out);
}

std::string section_label(const Section& s) { return s.is_preamble() ? std::string("Introduction") : *s.heading; }

std::string blueprint(const PromptSpec& spec) {
    const auto body = between(spec.user_text, prompts::kWebpage, prompts::kInstructions);
    const auto instructions = json_after(spec.user_text, prompts::kInstructions);
    const auto index = index_sections(body);
    std::map<std::size_t, std::vector<json>> by_section;
    std::vector<json> unplaced;
    for (const auto& ins : instructions) {
        const auto m = text::locate_excerpt(body, ins.at("excerpt").get<std::string>());
        if (m.locatable) {
            by_section[index.section_at(m.offset)].push_back(ins);
        } else {
            unplaced.push_back(ins);
        }
    }
    json items = json::array();
    auto emit = [&](const std::string& name, const std::vector<json>& group) {
        json directives = json::array();
        std::vector<std::string> topics;
        for (const auto& ins : group) {
            directives.push_back("Integrate instruction #" + ins.at("id").get<std::string>() + ": " +
                                 ins.at("suggestion").get<std::string>());
            const auto topic = ins.value("topic", std::string{});
            if (!topic.empty() && std::find(topics.begin(), topics.end(), topic) == topics.end()) {
                topics.push_back(topic);
            }
        }
        items.push_back({
            {"section_name", name},
            {"target_location", "End of the section, after: " +
                                    std::string(word_prefix(group.front().at("excerpt").get<std::string>(), 8))},
            {"modification_intent", "Integrate " + std::to_string(group.size()) + " instruction(s) on " +
                                        (topics.empty() ? std::string("the section topic") : join(topics, ", "))},
            {"directives", std::move(directives)},
            {"format_note", "Plain paragraph text; keep the existing Markdown structure."},
        });
    };
    for (const auto& [sec, group] : by_section) emit(section_label(index.sections[sec]), group);
    if (!unplaced.empty()) emit("Further Details", unplaced);
    return fenced({{"revision_blueprint", std::move(items)}});
}

std::string revise(const PromptSpec& spec) {
    const auto body = std::string(between(spec.user_text, prompts::kWebpage, prompts::kBlueprint));
    const auto bp = json_after(spec.user_text, prompts::kBlueprint);
    const auto index = index_sections(body);
    std::vector<PendingInsert> inserts;
    for (const auto& item : bp.at("revision_blueprint")) {
        std::vector<std::string> texts;
        for (const auto& d : item.at("directives")) {
            for (auto& q : quoted_segments(d.get<std::string>())) texts.push_back(std::move(q));
        }
        const auto name = item.at("section_name").get<std::string>();
        inserts.push_back({index.find_by_name(name), name, join(texts, " ")});
    }
    return apply_inserts(body, std::move(inserts));
}

std::string revise_flat(const PromptSpec& spec) {
    const auto body = std::string(between(spec.user_text, prompts::kWebpage, prompts::kFlatInstructions));
    const auto instructions = json_after(spec.user_text, prompts::kFlatInstructions);
    const auto index = index_sections(body);
    std::vector<PendingInsert> inserts;
    for (const auto& ins : instructions) {
        const auto m = text::locate_excerpt(body, ins.at("excerpt").get<std::string>());
        const auto texts = quoted_segments(ins.at("suggestion").get<std::string>());
        std::optional<std::size_t> sec;
        if (m.locatable) sec = index.section_at(m.offset);
        inserts.push_back({sec, "Further Details", join(texts, " ")});
    }
    return apply_inserts(body, std::move(inserts));
}

std::string engine(const PromptSpec& spec) {
    auto question = after(spec.user_text, prompts::kQuestion);
    question = question.substr(0, question.find("\n\nSources:\n\n"));
    const auto q_terms = text::content_terms(question);
    const std::unordered_set<std::string> q_set(q_terms.begin(), q_terms.end());

    std::vector<std::string_view> sources;
    auto rest = std::string_view(spec.user_text);
    for (auto pos = rest.find(prompts::kSourceOpen); pos != std::string_view::npos;) {
        const auto body_start = rest.find(prompts::kSourceClose, pos);
        if (body_start == std::string_view::npos) break;
        const auto start = body_start + prompts::kSourceClose.size();
        const auto next = rest.find(prompts::kSourceOpen, start);
        auto body = rest.substr(start, (next == std::string_view::npos ? rest.size() : next) - start);
        sources.push_back(body);
        pos = next;
    }
    std::string answer;
    for (std::size_t k = 0; k < sources.size(); ++k) {
        const auto tokens = text::tokenize(sources[k]);
        std::size_t overlap = 0;
        for (const auto& t : tokens) overlap += q_set.count(t);
        const std::size_t length = std::min<std::size_t>(4 + 2 * overlap, 120);
        std::string sentence;
        for (std::size_t w = 0; w < length; ++w) {
            std::string word = tokens.empty() ? std::string("source") : tokens[w % tokens.size()];
            if (w == 0) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
            if (w) sentence += ' ';
            sentence += word;
        }
        if (k) answer += ' ';
        answer += sentence + " [" + std::to_string(k + 1) + "].";
    }
    return answer;
}

std::string judge(const PromptSpec& spec, SplitMix64& rng) {
    static const std::regex kTarget(R"(Target source: \[(\d+)\])");
    const int target = number_in(spec.user_text, kTarget, 1);
    const auto answer = after(spec.user_text, prompts::kJudgeAnswer);
    const auto marker = "[" + std::to_string(target) + "]";
    std::size_t total = 0, mine = 0, start = 0;
    while (start < answer.size()) {
        auto end = answer.find(". ", start);
        end = end == std::string_view::npos ? answer.size() : end + 1;
        const auto sentence = answer.substr(start, end - start);
        const auto words = text::count_words(sentence);
        total += words;
        if (sentence.find(marker) != std::string_view::npos) mine += words;
        start = end;
    }
    const double share = total ? static_cast<double>(mine) / static_cast<double>(total) : 0.0;
    json out = json::object();
    for (auto dim : kJudgeDimensions) {
        const int jitter = rng.between(-1, 1);
        out[std::string(dim)] = std::clamp(static_cast<int>(std::lround(1.0 + 4.0 * share)) + jitter, 1, 5);
    }
    return out.dump(2);
}

std::string heuristic(const PromptSpec& spec) {
    static const std::vector<std::pair<std::string_view, std::string_view>> kStamps{
        {"Traditional SEO", "Key topics on this page: {terms}."},
        {"Unique Words", "Distinctively put, {terms} form the crux of this page."},
        {"Simple Expression", "Put simply, this page is about {terms}."},
        {"Authoritative", "Experts agree that {terms} are well established."},
        {"Fluency Optimization", "Taken together, these points on {terms} read as one clear account."},
        {"Technical Terms", "Technical terms used here include {terms}."},
        {"Cite Sources", "Claims about {terms} follow established references [Source: Reference Handbook]."},
        {"Quotation Addition", "\"{terms} matter,\" as one specialist put it."},
        {"Statistics Addition", "About 42% of readers searching for {terms} look for this information."},
    };
    const auto body = std::string(after(spec.user_text, prompts::kWebpage));
    auto terms = salient_terms(body);
    if (terms.size() > 3) terms.resize(3);
    if (terms.empty()) terms.push_back("this topic");
    for (const auto& [name, stamp] : kStamps) {
        if (spec.system_text.find("Strategy: " + std::string(name) + ".") != std::string::npos) {
            std::string line = prompts::render(stamp, {{"terms", join(terms, ", ")}});
            std::size_t pos = body.size();
            while (pos > 0 && std::isspace(static_cast<unsigned char>(body[pos - 1]))) --pos;
            return body.substr(0, pos) + "\n\n" + line + body.substr(pos);
        }
    }
    throw BackendRefusal("mock: unrecognized heuristic strategy");
}

}  // namespace

MockBackend::MockBackend(std::uint64_t seed) : seed_(seed) {}

std::string MockBackend::id() const { return "mock-v1/seed=" + std::to_string(seed_); }

BackendReply MockBackend::complete(const PromptSpec& spec) {
    calls_.fetch_add(1);
    const auto key = cache_key(id(), spec);
    SplitMix64 rng(std::stoull(key.substr(0, 16), nullptr, 16) ^ seed_);

    std::string out;
    switch (spec.stage) {
        case Stage::mining: out = mine(spec, rng); break;
        case Stage::request_gen: out = request_gen(spec, rng); break;
        case Stage::dedup: out = dedup(spec); break;
        case Stage::conflict: out = conflict(spec); break;
        case Stage::blueprint: out = blueprint(spec); break;
        case Stage::revise:
            out = spec.user_text.find(prompts::kBlueprint) != std::string::npos ? revise(spec) : revise_flat(spec);
            break;
        case Stage::engine: out = engine(spec); break;
        case Stage::judge: out = judge(spec, rng); break;
        case Stage::heuristic: out = heuristic(spec); break;
    }
    BackendReply reply;
    reply.prompt_tokens = estimate_tokens(spec.system_text) + estimate_tokens(spec.user_text);
    reply.completion_tokens = estimate_tokens(out);
    reply.text = std::move(out);
    return reply;
}

}  // namespace ifgeo::llm
