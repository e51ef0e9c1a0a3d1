#include "ifgeo/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <regex>

#include "ifgeo/prompts.hpp"
#include "ifgeo/text.hpp"

namespace ifgeo {

using nlohmann::json;

void RunLog::warn(std::string message) {
    std::lock_guard lock(mutex_);
    warnings_.push_back(std::move(message));
}

std::vector<std::string> RunLog::warnings() const {
    std::lock_guard lock(mutex_);
    return warnings_;
}

// ---- pure stage helpers --------------------------------------------------

void score_requests(std::vector<EditRequest>& pool, const QuerySet& qs) {
    for (auto& r : pool) {
        if (r.query_index >= qs.entries.size()) {
            throw IndexError("request (" + std::to_string(r.query_index) + "," + std::to_string(r.request_index) +
                             ") points at query " + std::to_string(r.query_index) + " of " +
                             std::to_string(qs.entries.size()));
        }
        r.global_priority = global_priority(qs.entries[r.query_index].weight, r.necessity);
    }
}

std::vector<EditRequest> prioritize_and_filter(std::vector<EditRequest> pool, const QuerySet& qs, double tau) {
    score_requests(pool, qs);
    // Absorbs representation error in products such as 0.7 * 1.0.
    constexpr double kSlack = 1e-12;
    std::erase_if(pool, [&](const EditRequest& r) { return r.global_priority < tau - kSlack; });
    return pool;
}

std::vector<FusedInstruction> lift_requests(const std::vector<EditRequest>& pool) {
    std::vector<FusedInstruction> out;
    out.reserve(pool.size());
    for (const auto& r : pool) {
        FusedInstruction f;
        f.id = "req_" + std::to_string(r.query_index) + "_" + std::to_string(r.request_index);
        f.topic = "q" + std::to_string(r.query_index);
        f.excerpt = r.excerpt;
        f.suggestion = r.suggestion;
        f.necessity = r.necessity;
        f.priority = r.global_priority;
        f.provenance = {{r.query_index, r.request_index}};
        f.resolution = Resolution::kept;
        out.push_back(std::move(f));
    }
    return out;
}

namespace {

std::string rtrim(std::string_view s) {
    std::size_t n = s.size();
    while (n > 0 && std::isspace(static_cast<unsigned char>(s[n - 1]))) --n;
    return std::string(s.substr(0, n));
}

/// (section name, occurrence of that name) for every section of a body.
std::vector<std::pair<std::string, int>> section_keys(const SectionIndex& idx) {
    std::map<std::string, int> seen;
    std::vector<std::pair<std::string, int>> keys;
    for (const auto& s : idx.sections) {
        const auto name = s.name();
        keys.push_back({name, seen[name]++});
    }
    return keys;
}

std::optional<std::size_t> find_key(const std::vector<std::pair<std::string, int>>& keys,
                                    const std::pair<std::string, int>& key) {
    for (std::size_t i = 0; i < keys.size(); ++i) {
        if (keys[i] == key) return i;
    }
    return std::nullopt;
}

std::string section_label(const Section& s) { return s.is_preamble() ? std::string("Introduction") : *s.heading; }

std::string describe_key(const std::pair<std::string, int>& key) {
    return key.second ? key.first + " #" + std::to_string(key.second + 1) : key.first;
}

}  // namespace

PreservationReport check_preservation(std::string_view original, std::string_view revised,
                                      const std::set<std::size_t>& named) {
    const auto oi = index_sections(original);
    const auto ri = index_sections(revised);
    const auto okeys = section_keys(oi);
    const auto rkeys = section_keys(ri);
    PreservationReport report;
    for (std::size_t i = 0; i < oi.sections.size(); ++i) {
        if (named.contains(i)) continue;
        const auto match = find_key(rkeys, okeys[i]);
        if (!match) {
            // An empty preamble-less body has nothing to lose.
            if (!rtrim(oi.sections[i].slice(original)).empty()) report.missing.push_back(describe_key(okeys[i]));
            continue;
        }
        if (rtrim(oi.sections[i].slice(original)) != rtrim(ri.sections[*match].slice(revised))) {
            report.violated.push_back(describe_key(okeys[i]));
        }
    }
    return report;
}

std::string restore_sections(std::string_view original, std::string_view revised, const std::set<std::size_t>& named) {
    const auto oi = index_sections(original);
    const auto ri = index_sections(revised);
    const auto okeys = section_keys(oi);
    const auto rkeys = section_keys(ri);

    // Revised sections in order, with unnamed originals swapped back in.
    std::vector<std::string> pieces;
    for (std::size_t r = 0; r < ri.sections.size(); ++r) {
        std::string piece(ri.sections[r].slice(revised));
        if (auto o = find_key(okeys, rkeys[r]); o && !named.contains(*o)) {
            const auto trailing = piece.substr(rtrim(piece).size());
            piece = rtrim(oi.sections[*o].slice(original)) + trailing;
        }
        pieces.push_back(std::move(piece));
    }
    // Missing unnamed originals go back after their nearest surviving
    // predecessor, or in front of everything.
    std::string front;
    std::vector<std::string> after(pieces.size());
    for (std::size_t o = 0; o < oi.sections.size(); ++o) {
        if (named.contains(o) || find_key(rkeys, okeys[o])) continue;
        std::optional<std::size_t> anchor;
        for (std::size_t p = o; p-- > 0;) {
            if (auto r = find_key(rkeys, okeys[p])) {
                anchor = *r;
                break;
            }
        }
        auto text = std::string(oi.sections[o].slice(original));
        if (text.empty() || text.back() != '\n') text += '\n';
        if (anchor) {
            after[*anchor] += text;
        } else {
            front += text;
        }
    }
    std::string out = front;
    for (std::size_t r = 0; r < pieces.size(); ++r) {
        out += pieces[r];
        if (!after[r].empty() && !out.empty() && out.back() != '\n') out += '\n';
        out += after[r];
    }
    return out;
}

// ---- Pipeline ------------------------------------------------------------

Pipeline::Pipeline(llm::Gateway& gateway, PipelineConfig config, std::uint64_t seed)
    : gateway_(gateway), config_(std::move(config)), seed_(seed) {
    validate(config_);
}

llm::StructuredCompletion Pipeline::call(const llm::PromptSpec& spec) {
    auto out = gateway_.complete_structured(spec, &meter_);
    if (out.completion.cached) cache_hits_.fetch_add(1);
    for (const auto& w : out.warnings) log_.warn(std::string(stage_name(spec.stage)) + ": " + w);
    return out;
}

std::vector<std::string> Pipeline::preservation_violations() const { return violations_.warnings(); }

namespace {

std::vector<WeightedQuery> parse_queries(const json& payload, RunLog& log) {
    std::vector<WeightedQuery> raw;
    const auto& arr = payload.at("queries");
    bool all_unit = !arr.empty();
    bool any_fraction = false;
    for (const auto& q : arr) {
        const double p = q.at("probability").get<double>();
        all_unit = all_unit && p <= 1.0;
        any_fraction = any_fraction || (p > 0.0 && p < 1.0);
    }
    const bool rescale = all_unit && any_fraction;
    if (rescale) log.warn("mining: probabilities given on a 0-1 scale; multiplied by 100");

    for (const auto& q : arr) {
        auto t = std::string(text::trim(q.at("query").get<std::string>()));
        if (t.empty()) continue;
        double p = q.at("probability").get<double>();
        if (rescale) p *= 100.0;
        const int w = std::clamp(static_cast<int>(std::lround(p)), 0, 100);
        // Paraphrase collapse keeps the higher weight at the first position.
        auto dup = std::find_if(raw.begin(), raw.end(), [&](const WeightedQuery& prev) {
            return text::normalize(prev.text) == text::normalize(t) || text::token_jaccard(prev.text, t) > 0.9;
        });
        if (dup != raw.end()) {
            log.warn("mining: collapsed near-duplicate query '" + t + "' into '" + dup->text + "'");
            dup->weight = std::max(dup->weight, w);
            continue;
        }
        raw.push_back({std::move(t), w});
    }
    return raw;
}

}  // namespace

QuerySet Pipeline::mine_queries(const Document& doc) {
    validate(doc);
    const auto n = static_cast<std::size_t>(config_.n_queries);
    auto spec = prompts::mining(doc, config_.n_queries, config_.temperature);
    auto entries = parse_queries(call(spec).value, log_);
    if (entries.size() != n) {
        log_.warn("mining: got " + std::to_string(entries.size()) + " queries, expected " + std::to_string(n) +
                  "; re-asking once");
        spec.user_text += "\n\nReturn exactly " + std::to_string(n) + " distinct queries.";
        auto second = parse_queries(call(spec).value, log_);
        const auto usable = [&](const auto& v) { return std::min(v.size(), n); };
        if (usable(second) >= usable(entries)) entries = std::move(second);
    }
    if (entries.size() > n) {
        log_.warn("mining: truncated " + std::to_string(entries.size()) + " queries to " + std::to_string(n));
        entries.resize(n);
    } else if (entries.size() < n && !entries.empty()) {
        log_.warn("mining: accepting " + std::to_string(entries.size()) + " of " + std::to_string(n) + " queries");
    }
    if (entries.empty()) throw EmptyQuerySet("no valid queries mined for " + doc.doc_id);
    return {doc.doc_id, std::move(entries)};
}

std::vector<EditRequest> Pipeline::generate_requests(const Document& doc, const WeightedQuery& q,
                                                     std::size_t query_index) {
    const auto result = call(prompts::request_generation(doc, q.text, config_.n_suggestions, config_.temperature));
    std::vector<EditRequest> out;
    for (const auto& s : result.value.at("suggestions")) {
        if (out.size() == static_cast<std::size_t>(config_.n_suggestions)) {
            log_.warn("request_gen: query " + std::to_string(query_index) + " returned more than " +
                      std::to_string(config_.n_suggestions) + " suggestions; extra ones dropped");
            break;
        }
        EditRequest r;
        r.query_index = query_index;
        r.request_index = out.size();
        r.excerpt = s.at("excerpt").get<std::string>();
        r.suggestion = s.at("suggestion").get<std::string>();
        r.necessity = std::clamp(static_cast<int>(std::lround(s.at("necessity").get<double>())), 0, 100);
        r.anchor = text::locate_excerpt(doc.body, r.excerpt);
        if (!r.anchor.locatable) {
            log_.warn("request_gen: excerpt of request (" + std::to_string(query_index) + "," +
                      std::to_string(r.request_index) + ") is unlocatable in the document");
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<EditRequest> Pipeline::generate_all(const Document& doc, const QuerySet& qs) {
    std::vector<std::future<std::vector<EditRequest>>> jobs;
    jobs.reserve(qs.entries.size());
    for (std::size_t i = 0; i < qs.entries.size(); ++i) {
        jobs.push_back(std::async(std::launch::async, [this, &doc, &qs, i] {
            return generate_requests(doc, qs.entries[i], i);
        }));
    }
    std::vector<EditRequest> pool;
    std::exception_ptr first_error;
    for (auto& job : jobs) {
        try {
            auto part = job.get();
            pool.insert(pool.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);
    return pool;
}

namespace {

double query_weight_of(const FusedInstruction& f, const QuerySet& qs) {
    int best = 0;
    for (const auto& ref : f.provenance) {
        if (ref.query_index < qs.entries.size()) best = std::max(best, qs.entries[ref.query_index].weight);
    }
    return best;
}

bool same_anchor(std::string_view a, std::string_view b) {
    return text::excerpt_similarity(a, b) >= text::kAnchorSimilarityFloor;
}

void add_provenance(FusedInstruction& f, const std::vector<RequestRef>& refs) {
    for (const auto& r : refs) {
        if (std::find(f.provenance.begin(), f.provenance.end(), r) == f.provenance.end()) f.provenance.push_back(r);
    }
    std::sort(f.provenance.begin(), f.provenance.end());
}

void make_ids_unique(std::vector<FusedInstruction>& items, RunLog& log) {
    std::map<std::string, int> seen;
    for (auto& f : items) {
        if (seen[f.id]++ == 0) continue;
        auto fresh = f.id + "_" + std::to_string(seen[f.id]);
        while (seen.contains(fresh)) fresh += "x";
        log.warn("duplicate instruction id '" + f.id + "' renamed to '" + fresh + "'");
        seen[fresh] = 1;
        f.id = std::move(fresh);
    }
}

}  // namespace

std::vector<FusedInstruction> Pipeline::deduplicate(const QuerySet& qs, const std::vector<EditRequest>& pool) {
    if (pool.empty()) return {};
    if (pool.size() == 1) return lift_requests(pool);

    const auto result = call(prompts::deduplication(qs, pool, config_.temperature));
    const auto& outputs = result.value;

    // Each input joins the output whose excerpt matches it best.
    std::vector<std::vector<std::size_t>> members(outputs.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        std::optional<std::size_t> best;
        double best_sim = -1.0, best_tie = -1.0;
        for (std::size_t o = 0; o < outputs.size(); ++o) {
            const double sim = text::excerpt_similarity(pool[i].excerpt, outputs[o].at("excerpt").get<std::string>());
            if (sim < text::kAnchorSimilarityFloor) continue;
            const double tie = text::token_jaccard(pool[i].suggestion, outputs[o].at("suggestion").get<std::string>());
            if (sim > best_sim || (sim == best_sim && tie > best_tie)) {
                best = o;
                best_sim = sim;
                best_tie = tie;
            }
        }
        if (best) members[*best].push_back(i);
    }

    std::vector<FusedInstruction> fused;
    for (std::size_t o = 0; o < outputs.size(); ++o) {
        const auto& out = outputs[o];
        auto& group = members[o];
        if (group.empty()) {
            // Lent an input already claimed elsewhere, if any is close enough.
            double best_sim = text::kAnchorSimilarityFloor;
            std::optional<std::size_t> best;
            for (std::size_t i = 0; i < pool.size(); ++i) {
                const double sim = text::excerpt_similarity(pool[i].excerpt, out.at("excerpt").get<std::string>());
                if (sim >= best_sim && (!best || sim > best_sim)) {
                    best = i;
                    best_sim = sim;
                }
            }
            if (!best) {
                log_.warn("dedup: provenance: output '" + out.at("id").get<std::string>() +
                          "' matches no input excerpt; dropped");
                continue;
            }
            group.push_back(*best);
        }
        FusedInstruction f;
        f.id = out.at("id").get<std::string>();
        f.topic = std::string(text::trim(out.at("topic").get<std::string>()));
        f.excerpt = out.at("excerpt").get<std::string>();
        f.suggestion = out.at("suggestion").get<std::string>();
        int max_necessity = 0;
        for (auto i : group) {
            max_necessity = std::max(max_necessity, pool[i].necessity);
            f.priority = std::max(f.priority, pool[i].global_priority);
            f.provenance.push_back({pool[i].query_index, pool[i].request_index});
        }
        std::sort(f.provenance.begin(), f.provenance.end());
        const int model_necessity = static_cast<int>(std::lround(out.at("necessity").get<double>()));
        if (model_necessity != max_necessity) {
            log_.warn("dedup: necessity of '" + f.id + "' set to the constituent maximum " +
                      std::to_string(max_necessity) + " (model said " + std::to_string(model_necessity) + ")");
        }
        f.necessity = max_necessity;
        f.resolution = group.size() > 1 ? Resolution::merged : Resolution::kept;
        if (f.topic.empty()) {
            auto terms = text::content_terms(f.excerpt);
            if (terms.size() > 3) terms.resize(3);
            for (const auto& t : terms) f.topic += (f.topic.empty() ? "" : "-") + t;
            if (f.topic.empty()) f.topic = "general";
        }
        fused.push_back(std::move(f));
    }
    make_ids_unique(fused, log_);
    return fused;
}

std::vector<FusedInstruction> Pipeline::resolve_conflicts(const QuerySet& qs,
                                                          const std::vector<FusedInstruction>& items) {
    bool shared_anchor = false;
    for (std::size_t i = 0; i < items.size() && !shared_anchor; ++i) {
        for (std::size_t j = i + 1; j < items.size() && !shared_anchor; ++j) {
            shared_anchor = same_anchor(items[i].excerpt, items[j].excerpt);
        }
    }
    if (!shared_anchor) return items;

    const auto result = call(prompts::conflict_resolution(items, config_.temperature));
    std::map<std::string, std::size_t> by_id;
    for (std::size_t i = 0; i < items.size(); ++i) by_id.emplace(items[i].id, i);

    std::vector<bool> present(items.size(), false);
    for (const auto& out : result.value) {
        if (auto it = by_id.find(out.at("id").get<std::string>()); it != by_id.end()) present[it->second] = true;
    }
    std::vector<bool> absorbed(items.size(), false);

    std::vector<FusedInstruction> resolved;
    for (const auto& out : result.value) {
        const auto id = out.at("id").get<std::string>();
        const auto excerpt = out.at("excerpt").get<std::string>();
        if (auto it = by_id.find(id); it != by_id.end()) {
            FusedInstruction f = items[it->second];
            f.excerpt = excerpt;
            f.suggestion = out.at("suggestion").get<std::string>();
            for (std::size_t j = 0; j < items.size(); ++j) {
                if (j != it->second && !present[j] && same_anchor(items[j].excerpt, items[it->second].excerpt)) {
                    f.resolution = Resolution::selected;
                }
            }
            resolved.push_back(std::move(f));
            continue;
        }
        FusedInstruction f;
        f.id = id;
        f.excerpt = excerpt;
        f.suggestion = out.at("suggestion").get<std::string>();
        f.resolution = Resolution::synthesized;
        for (std::size_t j = 0; j < items.size(); ++j) {
            if (!present[j] && same_anchor(items[j].excerpt, excerpt)) {
                add_provenance(f, items[j].provenance);
                f.necessity = std::max(f.necessity, items[j].necessity);
                f.priority = std::max(f.priority, items[j].priority);
                if (f.topic.empty()) f.topic = items[j].topic;
                absorbed[j] = true;
            }
        }
        if (f.provenance.empty()) {
            log_.warn("conflict: provenance: synthesized instruction '" + id + "' matches no input; dropped");
            continue;
        }
        if (out.contains("necessity")) f.necessity = static_cast<int>(std::lround(out.at("necessity").get<double>()));
        resolved.push_back(std::move(f));
    }

    // Inputs the model dropped without a conflicting survivor pass through.
    for (std::size_t j = 0; j < items.size(); ++j) {
        if (present[j] || absorbed[j]) continue;
        const auto intent = classify_intent(items[j].suggestion);
        const bool lost_conflict = std::any_of(resolved.begin(), resolved.end(), [&](const FusedInstruction& r) {
            return same_anchor(r.excerpt, items[j].excerpt) && intents_conflict(intent, classify_intent(r.suggestion));
        });
        if (lost_conflict) continue;
        log_.warn("conflict: compatible instruction '" + items[j].id + "' was dropped by the model; restored");
        resolved.push_back(items[j]);
    }

    // Selection guard: a surviving reduce/expand pair on one anchor keeps
    // the higher necessity, then the higher query weight, then the earlier.
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t a = 0; a < resolved.size() && !changed; ++a) {
            for (std::size_t b = a + 1; b < resolved.size() && !changed; ++b) {
                if (!same_anchor(resolved[a].excerpt, resolved[b].excerpt)) continue;
                if (!intents_conflict(classify_intent(resolved[a].suggestion), classify_intent(resolved[b].suggestion))) {
                    continue;
                }
                std::size_t loser = b;
                if (resolved[b].necessity > resolved[a].necessity ||
                    (resolved[b].necessity == resolved[a].necessity &&
                     query_weight_of(resolved[b], qs) > query_weight_of(resolved[a], qs))) {
                    loser = a;
                }
                const std::size_t winner = loser == a ? b : a;
                log_.warn("conflict: '" + resolved[winner].id + "' selected over '" + resolved[loser].id +
                          "' on a shared excerpt");
                if (resolved[winner].resolution != Resolution::synthesized) {
                    resolved[winner].resolution = Resolution::selected;
                }
                resolved.erase(resolved.begin() + static_cast<std::ptrdiff_t>(loser));
                changed = true;
            }
        }
    }
    make_ids_unique(resolved, log_);
    return resolved;
}

namespace {

/// Ids a directive cites with '#', matched exactly or by numeric suffix.
std::vector<std::size_t> cited_instructions(std::string_view directive, const std::vector<FusedInstruction>& items) {
    static const std::regex kRef(R"(#([A-Za-z0-9_\-]+))");
    std::vector<std::size_t> out;
    const std::string d(directive);
    for (auto it = std::sregex_iterator(d.begin(), d.end(), kRef); it != std::sregex_iterator(); ++it) {
        const auto ref = (*it)[1].str();
        std::optional<std::size_t> hit;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (items[i].id == ref) hit = i;
        }
        if (!hit && std::all_of(ref.begin(), ref.end(), [](unsigned char c) { return std::isdigit(c); })) {
            std::vector<std::size_t> suffixed;
            for (std::size_t i = 0; i < items.size(); ++i) {
                const auto& id = items[i].id;
                if (id.size() > ref.size() && id.ends_with(ref) && !std::isdigit(static_cast<unsigned char>(id[id.size() - ref.size() - 1]))) {
                    suffixed.push_back(i);
                }
            }
            if (suffixed.size() == 1) hit = suffixed.front();
        }
        if (hit && std::find(out.begin(), out.end(), *hit) == out.end()) out.push_back(*hit);
    }
    return out;
}

/// The single instruction a directive paraphrases, if exactly one stands out.
std::optional<std::size_t> paraphrased_instruction(std::string_view directive,
                                                   const std::vector<FusedInstruction>& items) {
    constexpr double kFloor = 0.3;
    std::optional<std::size_t> best;
    double best_score = kFloor;
    bool tied = false;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const double s = text::token_jaccard(directive, items[i].suggestion);
        if (s > best_score) {
            best = i;
            best_score = s;
            tied = false;
        } else if (best && s == best_score) {
            tied = true;
        }
    }
    if (tied) return std::nullopt;
    return best;
}

}  // namespace

Blueprint Pipeline::build_blueprint(const Document& doc, const std::vector<FusedInstruction>& items) {
    if (items.empty()) return {};
    const auto result = call(prompts::blueprint(doc, items, config_.temperature));
    const auto index = index_sections(doc.body);

    Blueprint bp;
    std::vector<bool> covered(items.size(), false);
    for (const auto& raw : result.value.at("revision_blueprint")) {
        BlueprintItem item;
        item.section_name = raw.at("section_name").get<std::string>();
        item.target_location = raw.at("target_location").get<std::string>();
        item.modification_intent = raw.at("modification_intent").get<std::string>();
        item.format_note = raw.at("format_note").get<std::string>();
        item.resolved_section = index.find_by_name(item.section_name);
        for (const auto& d : raw.at("directives")) {
            const auto directive = d.get<std::string>();
            auto refs = cited_instructions(directive, items);
            if (refs.empty()) {
                if (auto p = paraphrased_instruction(directive, items)) refs.push_back(*p);
            }
            if (refs.empty()) {
                log_.warn("blueprint: directive in '" + item.section_name + "' matches no instruction; kept as is");
                item.directives.push_back(directive);
                continue;
            }
            std::vector<std::size_t> fresh;
            for (auto r : refs) {
                if (!covered[r]) fresh.push_back(r);
            }
            if (fresh.empty()) {
                log_.warn("blueprint: dropped a directive repeating already placed instruction(s) in '" +
                          item.section_name + "'");
                continue;
            }
            item.directives.push_back(directive);
            for (auto r : fresh) {
                covered[r] = true;
                item.instruction_ids.push_back(items[r].id);
            }
        }
        if (item.directives.empty()) continue;
        bp.items.push_back(std::move(item));
    }

    // Fallback: uncovered instructions grouped by the section their excerpt
    // sits in.
    std::map<std::optional<std::size_t>, BlueprintItem> fallback;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (covered[i]) continue;
        const auto m = text::locate_excerpt(doc.body, items[i].excerpt);
        std::optional<std::size_t> sec;
        if (m.locatable) sec = index.section_at(m.offset);
        auto& fb = fallback[sec];
        if (fb.directives.empty()) {
            fb.section_name = sec ? section_label(index.sections[*sec]) : std::string("Further Details");
            fb.resolved_section = sec ? std::optional<std::size_t>(index.find_by_name(fb.section_name)) : std::nullopt;
            fb.target_location = "fallback placement at the instruction excerpts";
            fb.modification_intent = "Apply instructions the plan left out";
            fb.format_note = "Match the surrounding Markdown.";
        }
        fb.directives.push_back("Integrate instruction #" + items[i].id + ": " + items[i].suggestion);
        fb.instruction_ids.push_back(items[i].id);
        covered[i] = true;
        log_.warn("blueprint: instruction '" + items[i].id + "' missing from the plan; added to a fallback item");
    }
    for (auto& [sec, fb] : fallback) bp.items.push_back(std::move(fb));

    if (std::find(covered.begin(), covered.end(), false) != covered.end()) {
        throw CoverageError("blueprint leaves instructions uncovered after fallback");
    }
    std::stable_sort(bp.items.begin(), bp.items.end(), [](const BlueprintItem& a, const BlueprintItem& b) {
        const auto ka = a.resolved_section.value_or(static_cast<std::size_t>(-1));
        const auto kb = b.resolved_section.value_or(static_cast<std::size_t>(-1));
        return ka < kb;
    });
    return bp;
}

Document Pipeline::revise_and_check(const Document& doc, const llm::PromptSpec& spec,
                                    const std::set<std::size_t>& named) {
    const auto result = call(spec);
    Document revised{doc.doc_id, result.value.get<std::string>(), doc.origin_rank};
    const auto report = check_preservation(doc.body, revised.body, named);
    if (report.clean()) return revised;

    if (config_.strict_preservation) {
        revised.body = restore_sections(doc.body, revised.body, named);
        for (const auto& v : report.violated) violations_.warn("restored changed section '" + v + "'");
        for (const auto& m : report.missing) violations_.warn("restored missing section '" + m + "'");
        return revised;
    }
    if (!report.missing.empty()) {
        std::string names;
        for (const auto& m : report.missing) names += (names.empty() ? "'" : ", '") + m + "'";
        throw TruncationError("revision omits original section(s) " + names);
    }
    for (const auto& v : report.violated) violations_.warn("unnamed section '" + v + "' changed");
    return revised;
}

Document Pipeline::execute_blueprint(const Document& doc, const Blueprint& bp) {
    if (bp.empty()) return doc;
    std::set<std::size_t> named;
    for (const auto& item : bp.items) {
        if (item.resolved_section) named.insert(*item.resolved_section);
    }
    return revise_and_check(doc, prompts::revision(doc, bp, config_.temperature), named);
}

Document Pipeline::execute_flat(const Document& doc, const std::vector<FusedInstruction>& items) {
    if (items.empty()) return doc;
    const auto index = index_sections(doc.body);
    std::set<std::size_t> named;
    for (const auto& f : items) {
        const auto m = text::locate_excerpt(doc.body, f.excerpt);
        if (m.locatable) named.insert(index.section_at(m.offset));
    }
    return revise_and_check(doc, prompts::flat_revision(doc, items, config_.temperature), named);
}

PipelineArtifacts Pipeline::run(const Document& doc) {
    PipelineArtifacts art;
    art.revised = doc;
    art.manifest.config = config_;
    art.manifest.backend_id = gateway_.backend_id();
    art.manifest.seed = seed_;
    art.manifest.started_at = utc_timestamp();

    auto finish = [&] {
        art.manifest.stage_tokens = meter_.snapshot();
        art.manifest.finished_at = utc_timestamp();
        art.manifest.warnings = log_.warnings();
        art.manifest.preservation_violations = violations_.warnings();
        art.manifest.cache_hits = cache_hits_.load();
    };
    std::string stage = "validation";
    try {
        validate(doc);
        stage = "mining";
        art.query_set = mine_queries(doc);
        stage = "request_gen";
        art.raw_pool = generate_all(doc, art.query_set);
        score_requests(art.raw_pool, art.query_set);
        art.filtered = prioritize_and_filter(art.raw_pool, art.query_set, config_.tau);
        art.manifest.survival_rate =
            art.raw_pool.empty() ? 0.0
                                 : static_cast<double>(art.filtered.size()) / static_cast<double>(art.raw_pool.size());

        if (config_.has(Ablation::no_fusion)) {
            art.fused = lift_requests(art.filtered);
            stage = "revise";
            art.revised = execute_flat(doc, art.fused);
        } else {
            stage = "dedup";
            art.fused = deduplicate(art.query_set, art.filtered);
            if (!config_.has(Ablation::no_conflict_res)) {
                stage = "conflict";
                art.fused = resolve_conflicts(art.query_set, art.fused);
            }
            if (config_.has(Ablation::no_blueprint)) {
                stage = "revise";
                art.revised = execute_flat(doc, art.fused);
            } else {
                stage = "blueprint";
                art.blueprint = build_blueprint(doc, art.fused);
                stage = "revise";
                art.revised = execute_blueprint(doc, *art.blueprint);
            }
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const BudgetExceeded&) {
        throw;
    } catch (const Error& e) {
        finish();
        throw PipelineAborted(stage, e.what(), std::move(art));
    }
    finish();
    return art;
}

Document Pipeline::per_query_tune(const Document& doc, const QuerySet& qs, std::size_t target_index) {
    if (target_index >= qs.entries.size()) {
        throw IndexError("target query " + std::to_string(target_index) + " outside a set of " +
                         std::to_string(qs.entries.size()));
    }
    auto pool = generate_all(doc, qs);
    score_requests(pool, qs);
    std::erase_if(pool, [&](const EditRequest& r) { return r.query_index != target_index; });
    return execute_flat(doc, lift_requests(pool));
}

}  // namespace ifgeo
