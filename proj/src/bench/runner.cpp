#include "ifgeo/bench/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "ifgeo/bench/serialize.hpp"
#include "ifgeo/engine.hpp"
#include "ifgeo/errors.hpp"
#include "ifgeo/pipeline.hpp"
#include "ifgeo/stability.hpp"
#include "ifgeo/visibility.hpp"

namespace ifgeo::bench {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

struct QueryEval {
    visibility::ObjectiveColumns columns;
    double overall_raw = 0.0;
    std::optional<visibility::SubjectiveScore> subjective;
};

json eval_json(const QueryEval& e) {
    json j = {
        {"word", e.columns.word},
        {"position", e.columns.position},
        {"overall", e.columns.overall},
        {"overall_raw", e.overall_raw},
    };
    if (e.subjective) {
        j["subjective"] = e.subjective->average;
        j["subjective_dims"] = e.subjective->dims;
    } else {
        j["subjective"] = nullptr;
    }
    return j;
}

class Evaluator {
public:
    Evaluator(llm::Gateway& gateway, bool judge) : engine_(gateway), judge_(gateway), use_judge_(judge) {}

    std::vector<QueryEval> evaluate(const BenchRecord& rec, const Document& target, llm::TokenMeter& meter) {
        std::vector<QueryEval> out;
        for (std::size_t qi = 0; qi < rec.queries.size(); ++qi) {
            const auto cs = rec.candidate_set(qi, target);
            const auto resp = engine_.generate_response(rec.queries[qi], cs, &meter);
            const auto idx = *cs.target_position + 1;
            QueryEval e;
            e.columns = visibility::objective_columns(resp, idx);
            e.overall_raw = visibility::objective_impression(resp, idx).raw;
            if (use_judge_) e.subjective = judge_.score(resp, target, idx, rec.queries[qi], &meter);
            out.push_back(std::move(e));
        }
        return out;
    }

private:
    engine::Engine engine_;
    visibility::Judge judge_;
    bool use_judge_;
};

struct MethodResult {
    Document revised;
    json artifacts;
    std::array<StageTokens, kStageCount> tokens{};
    std::optional<std::size_t> target_query;
};

MethodResult run_method(const ExperimentConfig& cfg, const PipelineConfig& pcfg, const BenchRecord& rec,
                        llm::Gateway& gateway) {
    MethodResult r;
    switch (cfg.method.kind) {
        case Method::Kind::ifgeo: {
            Pipeline p(gateway, pcfg, cfg.seed);
            auto art = p.run(rec.document);
            r.revised = art.revised;
            r.tokens = art.manifest.stage_tokens;
            r.artifacts = art;
            break;
        }
        case Method::Kind::heuristic: {
            llm::TokenMeter meter;
            r.revised = apply_heuristic(gateway, rec.document, cfg.method.heuristic, pcfg.temperature, &meter);
            r.tokens = meter.snapshot();
            r.artifacts = {{"method", cfg.method.label()}, {"revised", r.revised},
                           {"stage_tokens", stage_tokens_json(r.tokens)}};
            break;
        }
        case Method::Kind::per_query_tune: {
            Pipeline p(gateway, pcfg, cfg.seed);
            QuerySet qs{rec.doc_id, {}};
            for (const auto& q : rec.queries) qs.entries.push_back({q, 100});
            const auto target = tuning_target(rec.doc_id, rec.queries.size(), cfg.seed);
            r.revised = p.per_query_tune(rec.document, qs, target);
            r.tokens = p.meter().snapshot();
            r.target_query = target;
            r.artifacts = {{"method", cfg.method.label()},
                           {"query_set", qs},
                           {"target_query", target},
                           {"revised", r.revised},
                           {"stage_tokens", stage_tokens_json(r.tokens)},
                           {"warnings", p.log().warnings()},
                           {"preservation_violations", p.preservation_violations()}};
            break;
        }
    }
    return r;
}

json gains_json(const BenchRecord& rec, const std::string& method, int n_queries, const std::vector<QueryEval>& before,
                const std::vector<QueryEval>& after, const MethodResult& m,
                const std::array<StageTokens, kStageCount>& eval_tokens) {
    json b = json::array(), a = json::array();
    std::vector<double> word, position, overall;
    json subjective = json::array();
    bool judged = true;
    for (std::size_t i = 0; i < before.size(); ++i) {
        b.push_back(eval_json(before[i]));
        a.push_back(eval_json(after[i]));
        word.push_back(after[i].columns.word - before[i].columns.word);
        position.push_back(after[i].columns.position - before[i].columns.position);
        overall.push_back(after[i].columns.overall - before[i].columns.overall);
        if (before[i].subjective && after[i].subjective) {
            subjective.push_back(after[i].subjective->average - before[i].subjective->average);
        } else {
            judged = false;
        }
    }
    const auto g = stability::gain_vector(
        [&] {
            std::vector<double> v;
            for (const auto& e : before) v.push_back(e.columns.overall);
            return v;
        }(),
        [&] {
            std::vector<double> v;
            for (const auto& e : after) v.push_back(e.columns.overall);
            return v;
        }(),
        rec.doc_id);
    json j = {
        {"doc_id", rec.doc_id},
        {"method", method},
        {"n_queries", n_queries},
        {"queries", rec.queries},
        {"before", std::move(b)},
        {"after", std::move(a)},
        {"gains",
         {{"word", word}, {"position", position}, {"overall", overall},
          {"subjective", judged ? subjective : json(nullptr)}}},
        {"stability", stability::stability_summary(g)},
        {"method_tokens", stage_tokens_json(m.tokens)},
        {"evaluation_tokens", stage_tokens_json(eval_tokens)},
    };
    j["origin_rank"] = rec.document.origin_rank ? json(*rec.document.origin_rank) : json(nullptr);
    j["target_query"] = m.target_query ? json(*m.target_query) : json(nullptr);
    return j;
}

std::vector<double> doubles(const json& j) { return j.get<std::vector<double>>(); }

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Per-record gains of one metric, with the records' stability summaries.
struct MetricBlock {
    std::vector<stability::GainVector> vectors;

    json summary() const {
        std::vector<stability::StabilityReport> reports;
        for (const auto& g : vectors) reports.push_back(stability::stability_summary(g));
        const auto avg = stability::average_reports(reports);
        return {{"mean_x100", avg.mean * 100.0}, {"stability", avg}};
    }
};

std::string stratum_key(const json& gains) {
    const auto& r = gains.at("origin_rank");
    return r.is_null() ? std::string("unranked") : std::to_string(r.get<int>());
}

}  // namespace

Method Method::parse(std::string_view text) {
    if (text == "ifgeo") return {Kind::ifgeo, {}};
    if (text == "per_query_tune") return {Kind::per_query_tune, {}};
    constexpr std::string_view prefix = "heuristic:";
    if (text.substr(0, prefix.size()) == prefix) {
        const auto name = text.substr(prefix.size());
        if (!is_heuristic(name)) throw ConfigError("unknown heuristic strategy '" + std::string(name) + "'");
        return {Kind::heuristic, std::string(name)};
    }
    throw ConfigError("unknown method '" + std::string(text) + "'");
}

std::string Method::label() const {
    switch (kind) {
        case Kind::ifgeo: return "ifgeo";
        case Kind::heuristic: return "heuristic:" + heuristic;
        case Kind::per_query_tune: return "per_query_tune";
    }
    return "unknown";
}

void validate(const ExperimentConfig& cfg) {
    validate(cfg.pipeline);
    if (cfg.method.kind == Method::Kind::heuristic && !is_heuristic(cfg.method.heuristic)) {
        throw ConfigError("unknown heuristic strategy '" + cfg.method.heuristic + "'");
    }
    if (cfg.sweep) {
        if (cfg.method.kind != Method::Kind::ifgeo) throw ConfigError("a query-count sweep needs method ifgeo");
        if (cfg.sweep->empty()) throw ConfigError("empty sweep");
        for (int n : *cfg.sweep) {
            auto p = cfg.pipeline;
            p.n_queries = n;
            validate(p);
        }
    }
    if (cfg.parallelism == 0) throw ConfigError("parallelism must be at least 1");
}

json to_json(const ExperimentConfig& cfg) {
    json j = {
        {"method", cfg.method.label()},
        {"pipeline", cfg.pipeline},
        {"strata", cfg.strata},
        {"sample_size", cfg.sample_size},
        {"seed", cfg.seed},
        {"judge", cfg.judge},
        {"parallelism", cfg.parallelism},
    };
    j["sweep"] = cfg.sweep ? json(*cfg.sweep) : json(nullptr);
    return j;
}

std::vector<std::size_t> sample_records(const std::vector<BenchRecord>& records, std::size_t sample_size,
                                        std::uint64_t seed) {
    if (sample_size == 0 || records.empty()) return sample_indices(records.size(), 0, seed);
    const auto per = std::max<std::size_t>(1, records.front().queries.size());
    const auto k = (sample_size + per - 1) / per;
    return sample_indices(records.size(), k, seed);
}

std::size_t tuning_target(std::string_view doc_id, std::size_t n_queries, std::uint64_t seed) {
    if (n_queries == 0) throw IndexError("no queries to tune for");
    std::mt19937_64 rng(seed ^ fnv1a(doc_id));
    return static_cast<std::size_t>(rng() % n_queries);
}

std::string record_dir_name(std::string_view doc_id) {
    std::string out;
    bool changed = false;
    for (char c : doc_id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                        c == '_' || c == '.';
        out += ok ? c : '_';
        changed |= !ok;
    }
    if (out.empty() || out.find_first_not_of('.') == std::string::npos) changed = true;
    if (changed) {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(doc_id)));
        out = "id_" + out + "-" + std::string(buf, 8);
    }
    return out;
}

json aggregate_variant(const std::string& label, int n_queries, const std::vector<json>& gains,
                       const std::vector<std::string>& quarantined, bool strata, bool competition) {
    json v = {{"label", label}, {"n_queries", n_queries}, {"quarantined", quarantined}};
    json ids = json::array();
    for (const auto& g : gains) ids.push_back(g.at("doc_id"));
    v["records"] = std::move(ids);

    MetricBlock word, position, overall;
    for (const auto& g : gains) {
        const auto id = g.at("doc_id").get<std::string>();
        word.vectors.push_back({id, doubles(g.at("gains").at("word")), std::nullopt});
        position.vectors.push_back({id, doubles(g.at("gains").at("position")), std::nullopt});
        overall.vectors.push_back({id, doubles(g.at("gains").at("overall")), std::nullopt});
    }
    v["objective"] = {{"word", word.summary()}, {"position", position.summary()}, {"overall", overall.summary()}};

    // Judge averages are z-matched onto the pooled objective shares (before
    // and after, every record) so both metrics live on one scale.
    bool judged = !gains.empty();
    for (const auto& g : gains) judged &= !g.at("gains").at("subjective").is_null();
    MetricBlock subjective;
    if (judged) {
        std::vector<double> levels, reference;
        for (const auto& g : gains) {
            for (const char* side : {"before", "after"}) {
                for (const auto& e : g.at(side)) {
                    levels.push_back(e.at("subjective").get<double>());
                    reference.push_back(e.at("overall").get<double>());
                }
            }
        }
        const auto z = visibility::z_match(levels, reference);
        std::size_t k = 0;
        std::vector<double> raw;
        for (const auto& g : gains) {
            const auto m = g.at("before").size();
            std::vector<double> gv(m);
            for (std::size_t i = 0; i < m; ++i) gv[i] = z[k + m + i] - z[k + i];
            k += 2 * m;
            subjective.vectors.push_back({g.at("doc_id").get<std::string>(), std::move(gv), std::nullopt});
            for (double x : doubles(g.at("gains").at("subjective"))) raw.push_back(x);
        }
        auto s = subjective.summary();
        s["raw_mean"] = mean_of(raw);
        v["subjective"] = std::move(s);
    } else {
        v["subjective"] = nullptr;
    }

    std::array<StageTokens, kStageCount> tokens{};
    for (const auto& g : gains) {
        const auto& t = g.at("method_tokens");
        for (auto s : kAllStages) {
            const auto& st = t.at(std::string(stage_name(s)));
            tokens[stage_slot(s)].prompt += st.at("prompt").get<std::int64_t>();
            tokens[stage_slot(s)].completion += st.at("completion").get<std::int64_t>();
        }
    }
    v["tokens"] = {{"documents", gains.size()}, {"stages", stage_tokens_json(tokens)}};

    if (strata) {
        std::map<std::string, std::vector<std::size_t>> buckets;
        for (std::size_t i = 0; i < gains.size(); ++i) buckets[stratum_key(gains[i])].push_back(i);
        json out = json::array();
        for (const auto& [key, members] : buckets) {
            MetricBlock o, s;
            for (auto i : members) {
                o.vectors.push_back(overall.vectors[i]);
                if (judged) s.vectors.push_back(subjective.vectors[i]);
            }
            out.push_back({{"origin_rank", key},
                           {"documents", members.size()},
                           {"overall", o.summary()},
                           {"subjective", judged ? s.summary() : json(nullptr)}});
        }
        v["strata"] = std::move(out);
    }

    if (competition) {
        std::vector<std::size_t> targets;
        for (const auto& g : gains) targets.push_back(g.at("target_query").get<std::size_t>());
        v["competition"] = stability::competition_stats(overall.vectors, targets);
    }
    return v;
}

RunSummary run_experiment(const ExperimentConfig& cfg, const std::vector<BenchRecord>& records,
                          llm::Gateway& gateway, const std::filesystem::path& run_dir) {
    validate(cfg);
    const auto started = utc_timestamp();
    std::filesystem::create_directories(run_dir);

    struct Variant {
        std::string label;
        PipelineConfig pipeline;
    };
    std::vector<Variant> variants;
    if (cfg.sweep) {
        for (int n : *cfg.sweep) {
            auto p = cfg.pipeline;
            p.n_queries = n;
            variants.push_back({"N=" + std::to_string(n), p});
        }
    } else {
        auto label = cfg.method.label();
        if (cfg.method.kind == Method::Kind::ifgeo && !cfg.pipeline.ablation.empty()) {
            label += "[";
            bool first = true;
            for (auto a : cfg.pipeline.ablation) {
                if (!first) label += ",";
                label += ablation_name(a);
                first = false;
            }
            label += "]";
        }
        variants.push_back({label, cfg.pipeline});
    }

    const auto sampled = sample_records(records, cfg.sample_size, cfg.seed);
    // outcomes[record][variant]: gains on success, the error text otherwise.
    struct Outcome {
        std::optional<json> gains;
        std::string error;
    };
    std::vector<std::vector<Outcome>> outcomes(sampled.size(), std::vector<Outcome>(variants.size()));

    auto dir_for = [&](const BenchRecord& rec, std::size_t v) {
        auto d = run_dir / "records" / record_dir_name(rec.doc_id);
        if (cfg.sweep) d /= "N" + std::to_string(variants[v].pipeline.n_queries);
        return d;
    };

    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr abort_error;
    std::mutex abort_mutex;

    auto process = [&](std::size_t slot) {
        const auto& rec = records[sampled[slot]];
        auto fail = [&](std::size_t v, const std::string& stage, const std::string& what) {
            outcomes[slot][v].error = what;
            write_json(dir_for(rec, v) / "error.json", {{"doc_id", rec.doc_id}, {"stage", stage}, {"error", what}});
        };
        Evaluator eval(gateway, cfg.judge);
        std::vector<QueryEval> before;
        llm::TokenMeter before_meter;
        try {
            before = eval.evaluate(rec, rec.document, before_meter);
        } catch (const ConfigError&) {
            throw;
        } catch (const BudgetExceeded&) {
            throw;
        } catch (const std::exception& e) {
            for (std::size_t v = 0; v < variants.size(); ++v) fail(v, "evaluation", e.what());
            return;
        }
        for (std::size_t v = 0; v < variants.size() && !stop.load(); ++v) {
            const auto dir = dir_for(rec, v);
            try {
                auto m = run_method(cfg, variants[v].pipeline, rec, gateway);
                write_json(dir / "artifacts.json", m.artifacts);
                llm::TokenMeter after_meter;
                const auto after = eval.evaluate(rec, m.revised, after_meter);
                auto eval_tokens = before_meter.snapshot();
                const auto extra = after_meter.snapshot();
                for (std::size_t s = 0; s < kStageCount; ++s) {
                    eval_tokens[s].prompt += extra[s].prompt;
                    eval_tokens[s].completion += extra[s].completion;
                }
                auto g = gains_json(rec, cfg.method.label(), variants[v].pipeline.n_queries, before, after, m,
                                    eval_tokens);
                write_json(dir / "gains.json", g);
                outcomes[slot][v].gains = std::move(g);
            } catch (const ConfigError&) {
                throw;
            } catch (const BudgetExceeded&) {
                throw;
            } catch (const PipelineAborted& e) {
                write_json(dir / "artifacts.json", e.partial());
                fail(v, e.stage(), e.what());
            } catch (const std::exception& e) {
                fail(v, "method", e.what());
            }
        }
    };

    auto worker = [&] {
        while (!stop.load()) {
            const auto slot = next.fetch_add(1);
            if (slot >= sampled.size()) return;
            try {
                process(slot);
            } catch (...) {
                std::lock_guard lock(abort_mutex);
                if (!abort_error) abort_error = std::current_exception();
                stop.store(true);
            }
        }
    };

    const auto width = std::min<std::size_t>(cfg.parallelism, std::max<std::size_t>(1, sampled.size()));
    if (width <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < width; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    RunSummary summary;
    summary.run_dir = run_dir;
    for (auto i : sampled) summary.sampled.push_back(records[i].doc_id);

    json variants_json = json::array();
    json quarantine_json = json::object();
    for (std::size_t v = 0; v < variants.size(); ++v) {
        VariantSummary vs{variants[v].label, variants[v].pipeline.n_queries, {}, {}};
        std::vector<json> gains;
        for (std::size_t slot = 0; slot < sampled.size(); ++slot) {
            const auto& o = outcomes[slot][v];
            const auto& id = records[sampled[slot]].doc_id;
            if (o.gains) {
                vs.completed.push_back(id);
                gains.push_back(*o.gains);
            } else if (!o.error.empty()) {
                vs.quarantined.push_back(id);
                quarantine_json[vs.label][id] = o.error;
            }
        }
        variants_json.push_back(aggregate_variant(vs.label, vs.n_queries, gains, vs.quarantined, cfg.strata,
                                                  cfg.method.kind == Method::Kind::per_query_tune));
        summary.variants.push_back(std::move(vs));
    }

    const auto stats = gateway.stats();
    json manifest = {
        {"experiment", to_json(cfg)},
        {"backend_id", gateway.backend_id()},
        {"seed", cfg.seed},
        {"dataset_records", records.size()},
        {"sampled", summary.sampled},
        {"quarantined", quarantine_json},
        {"gateway",
         {{"calls", stats.calls},
          {"cache_hits", stats.cache_hits},
          {"retries", stats.retries},
          {"repairs", stats.repairs},
          {"billed_tokens", stats.billed_tokens}}},
        {"started_at", started},
        {"finished_at", utc_timestamp()},
        {"status", abort_error ? "aborted" : "complete"},
    };
    write_json(run_dir / "manifest.json", manifest);
    if (abort_error) std::rethrow_exception(abort_error);

    summary.aggregate = {
        {"method", cfg.method.label()},
        {"backend_id", gateway.backend_id()},
        {"seed", cfg.seed},
        {"variants", std::move(variants_json)},
    };
    write_json(run_dir / "aggregate.json", summary.aggregate);
    return summary;
}

}  // namespace ifgeo::bench
