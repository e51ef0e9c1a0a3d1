#include "ifgeo/bench/reports.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "ifgeo/bench/serialize.hpp"
#include "ifgeo/errors.hpp"

namespace ifgeo::bench {

using nlohmann::json;

namespace {

constexpr const char* kReferenceLabel = "published reference (GPT-4o-mini, full benchmark)";

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string render() const {
        std::vector<std::size_t> width(header.size(), 0);
        auto widen = [&](const std::vector<std::string>& r) {
            for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
        };
        widen(header);
        for (const auto& r : rows) widen(r);
        auto line = [&](const std::vector<std::string>& r) {
            std::string out;
            for (std::size_t c = 0; c < width.size(); ++c) {
                const auto& cell = c < r.size() ? r[c] : std::string();
                if (c > 0) out += "  ";
                out += c == 0 ? fmt::format("{:<{}}", cell, width[c]) : fmt::format("{:>{}}", cell, width[c]);
            }
            while (!out.empty() && out.back() == ' ') out.pop_back();
            return out + "\n";
        };
        std::size_t total = 0;
        for (auto w : width) total += w;
        total += 2 * (width.size() - 1);
        std::string out = line(header);
        out += std::string(total, '-') + "\n";
        for (const auto& r : rows) out += line(r);
        return out;
    }
};

std::string f2(double x) { return fmt::format("{:.2f}", x); }
std::string f4(double x) { return fmt::format("{:.4f}", x); }
std::string pct(double x) { return fmt::format("{:.2f}%", 100.0 * x); }

const json& need(const json& j, const char* key, const char* where) {
    if (!j.is_object() || !j.contains(key)) {
        throw MissingArtifact(std::string(where) + " lacks '" + key + "'");
    }
    return j.at(key);
}

std::vector<std::string> stability_cells(const json& s) {
    return {f4(s.at("variance").get<double>()), f4(s.at("wcp").get<double>()), pct(s.at("wtr").get<double>()),
            f4(s.at("dr").get<double>())};
}

json reference_json() {
    return {
        {"label", kReferenceLabel},
        {"main",
         {{"objective", {{"word", 11.07}, {"position", 11.15}, {"overall", 11.03}}},
          {"subjective_average", 5.87},
          {"objective_stability", {{"variance", 0.0189}, {"wcp", -0.0090}, {"wtr", 0.8050}, {"dr", 0.0023}}},
          {"subjective_stability", {{"variance", 0.0116}, {"wcp", -0.0419}, {"wtr", 0.8556}, {"dr", 0.0036}}}}},
        {"ablation",
         json::array({
             {{"variant", "full"}, {"mean", 9.24}, {"variance", 0.0156}, {"wcp", -0.0328}, {"wtr", 0.8080}, {"dr", 0.0021}},
             {{"variant", "no_blueprint"}, {"mean", 8.18}, {"variance", 0.0167}, {"wcp", -0.0517}, {"wtr", 0.8120}, {"dr", 0.0021}},
             {{"variant", "no_fusion"}, {"mean", 7.07}, {"variance", 0.0156}, {"wcp", -0.0569}, {"wtr", 0.7480}, {"dr", 0.0043}},
             {{"variant", "no_conflict_res"}, {"mean", 6.14}, {"variance", 0.0174}, {"wcp", -0.0713}, {"wtr", 0.7720}, {"dr", 0.0032}},
         })},
        {"tokens",
         {{"Query Mining", 1270.6},
          {"Edit Request Generation", 1749.8},
          {"Instruction Fusion", 4487.6},
          {"Blueprint-Guided Revision", 2819.8},
          {"Total", 10327.7}}},
        {"competition",
         {{"target", {{"mean", 0.277}, {"p_negative", 0.124}, {"dm", 0.017}}},
          {"non_target", {{"mean", 0.087}, {"p_negative", 0.306}, {"dm", 0.036}}},
          {"spillover", {{"mean", -0.189}, {"p_negative", 0.692}, {"dm", 0.228}}}}},
    };
}

void emit(const std::filesystem::path& dir, const std::string& stem, const std::string& text, const json& j,
          std::vector<std::filesystem::path>& written) {
    write_text(dir / (stem + ".txt"), text);
    write_json(dir / (stem + ".json"), j);
    written.push_back(dir / (stem + ".txt"));
    written.push_back(dir / (stem + ".json"));
}

std::string comparison_text(const json& variants, const json& ref) {
    Table means{{"Variant", "Docs", "Obj. Word", "Obj. Position", "Obj. Overall", "Subj. Average", "Subj. raw"}, {}};
    Table stab{{"Variant", "Obj VAR", "Obj WCP", "Obj WTR", "Obj DR", "Subj VAR", "Subj WCP", "Subj WTR", "Subj DR"},
               {}};
    for (const auto& v : variants) {
        const auto& obj = v.at("objective");
        const auto& subj = v.at("subjective");
        const auto docs = v.at("records").size();
        means.rows.push_back({v.at("label").get<std::string>(), std::to_string(docs),
                              f2(obj.at("word").at("mean_x100").get<double>()),
                              f2(obj.at("position").at("mean_x100").get<double>()),
                              f2(obj.at("overall").at("mean_x100").get<double>()),
                              subj.is_null() ? "-" : f2(subj.at("mean_x100").get<double>()),
                              subj.is_null() ? "-" : f4(subj.at("raw_mean").get<double>())});
        std::vector<std::string> row{v.at("label").get<std::string>()};
        for (auto& c : stability_cells(obj.at("overall").at("stability"))) row.push_back(std::move(c));
        if (subj.is_null()) {
            row.insert(row.end(), {"-", "-", "-", "-"});
        } else {
            for (auto& c : stability_cells(subj.at("stability"))) row.push_back(std::move(c));
        }
        stab.rows.push_back(std::move(row));
    }

    const auto& m = ref.at("main");
    Table ref_means{{"", "Obj. Word", "Obj. Position", "Obj. Overall", "Subj. Average"},
                    {{"IF-GEO", f2(m.at("objective").at("word")), f2(m.at("objective").at("position")),
                      f2(m.at("objective").at("overall")), f2(m.at("subjective_average"))}}};
    Table ref_stab{stab.header, {}};
    {
        std::vector<std::string> row{"IF-GEO"};
        for (auto& c : stability_cells(m.at("objective_stability"))) row.push_back(std::move(c));
        for (auto& c : stability_cells(m.at("subjective_stability"))) row.push_back(std::move(c));
        ref_stab.rows.push_back(std::move(row));
    }
    Table ref_abl{{"Variant", "Mean", "VAR", "WCP", "WTR", "DR"}, {}};
    for (const auto& a : ref.at("ablation")) {
        std::vector<std::string> row{a.at("variant").get<std::string>(), f2(a.at("mean"))};
        for (auto& c : stability_cells(a)) row.push_back(std::move(c));
        ref_abl.rows.push_back(std::move(row));
    }

    std::string out = "Visibility improvement (share deltas x100; Subj. raw in rubric points)\n\n";
    out += means.render();
    out += "\nStability across queries (raw share scale)\n\n";
    out += stab.render();
    out += fmt::format("\n{}\n\n", kReferenceLabel);
    out += ref_means.render();
    out += "\n";
    out += ref_stab.render();
    out += "\n";
    out += ref_abl.render();
    out += "\nThe reference numbers come from a live model on the full benchmark; desk-scale and mock runs are not "
           "expected to match them.\n";
    return out;
}

}  // namespace

std::vector<TokenRow> token_rows(const json& variant, bool heuristic) {
    const auto& tokens = need(variant, "tokens", "variant");
    const auto& stages = need(tokens, "stages", "tokens");
    const auto docs = need(tokens, "documents", "tokens").get<std::size_t>();
    auto stage = [&](std::string_view name) {
        const auto& s = need(stages, std::string(name).c_str(), "stages");
        return std::pair{s.at("prompt").get<std::int64_t>(), s.at("completion").get<std::int64_t>()};
    };
    auto row = [&](std::string label, std::initializer_list<std::string_view> names) {
        TokenRow r{std::move(label), 0, 0, 0, 0.0};
        for (auto n : names) {
            const auto [p, c] = stage(n);
            r.prompt += p;
            r.completion += c;
        }
        r.total = r.prompt + r.completion;
        return r;
    };
    std::vector<TokenRow> rows;
    if (heuristic) {
        rows.push_back(row("Single-pass Rewrite", {"heuristic"}));
    } else {
        rows.push_back(row("Query Mining", {"mining"}));
        rows.push_back(row("Edit Request Generation", {"request_gen"}));
        rows.push_back(row("Instruction Fusion", {"dedup", "conflict", "blueprint"}));
        rows.push_back(row("Blueprint-Guided Revision", {"revise"}));
    }
    TokenRow total{"Total", 0, 0, 0, 0.0};
    for (const auto& r : rows) {
        total.prompt += r.prompt;
        total.completion += r.completion;
        total.total += r.total;
    }
    rows.push_back(total);
    for (auto& r : rows) r.mean_per_document = docs ? static_cast<double>(r.total) / static_cast<double>(docs) : 0.0;
    return rows;
}

std::vector<std::filesystem::path> emit_reports(const std::filesystem::path& run_dir) {
    const auto aggregate = read_json(run_dir / "aggregate.json");
    const auto manifest = read_json(run_dir / "manifest.json");
    const auto& variants = need(aggregate, "variants", "aggregate.json");
    const auto method = need(aggregate, "method", "aggregate.json").get<std::string>();
    need(manifest, "experiment", "manifest.json");
    const bool heuristic = method.rfind("heuristic:", 0) == 0;
    const auto reports = run_dir / "reports";
    const auto ref = reference_json();
    std::vector<std::filesystem::path> written;

    try {
        json cmp = {{"method", method}, {"variants", json::array()}, {"reference", ref}};
        for (const auto& v : variants) {
            cmp["variants"].push_back({{"label", v.at("label")},
                                       {"n_queries", v.at("n_queries")},
                                       {"documents", v.at("records").size()},
                                       {"quarantined", v.at("quarantined").size()},
                                       {"objective", v.at("objective")},
                                       {"subjective", v.at("subjective")}});
        }
        emit(reports, "comparison", comparison_text(variants, ref), cmp, written);

        json tok = {{"method", method}, {"variants", json::array()}};
        std::string tok_text = "Average tokens per document by stage (prompt + completion)\n";
        for (const auto& v : variants) {
            const auto rows = token_rows(v, heuristic);
            Table t{{"Stage", "Prompt", "Completion", "Total", "Avg. Tokens"}, {}};
            json jr = json::array();
            for (const auto& r : rows) {
                t.rows.push_back({r.stage, std::to_string(r.prompt), std::to_string(r.completion),
                                  std::to_string(r.total), fmt::format("{:.1f}", r.mean_per_document)});
                jr.push_back({{"stage", r.stage},
                              {"prompt", r.prompt},
                              {"completion", r.completion},
                              {"total", r.total},
                              {"mean_per_document", r.mean_per_document}});
            }
            const auto docs = v.at("tokens").at("documents").get<std::size_t>();
            tok_text += fmt::format("\n{} ({} documents)\n\n", v.at("label").get<std::string>(), docs);
            tok_text += t.render();
            tok["variants"].push_back({{"label", v.at("label")}, {"documents", docs}, {"rows", std::move(jr)}});
        }
        if (!heuristic) {
            Table t{{"Stage", "Avg. Tokens"}, {}};
            for (const char* s : {"Query Mining", "Edit Request Generation", "Instruction Fusion",
                                  "Blueprint-Guided Revision", "Total"}) {
                t.rows.push_back({s, fmt::format("{:.1f}", ref.at("tokens").at(s).get<double>())});
            }
            tok_text += fmt::format("\n{}\n\n", kReferenceLabel) + t.render();
            tok["reference"] = ref.at("tokens");
        }
        emit(reports, "tokens", tok_text, tok, written);

        const bool has_strata = std::any_of(variants.begin(), variants.end(),
                                            [](const json& v) { return v.contains("strata"); });
        if (has_strata) {
            std::string text = "Improvement by initial rank (Obj. Overall / Subj. Average)\n";
            json sj = {{"method", method}, {"variants", json::array()}};
            for (const auto& v : variants) {
                Table t{{"Rank", "Docs", "Obj Mean", "Obj VAR", "Obj WCP", "Obj WTR", "Obj DR", "Subj Mean",
                         "Subj VAR", "Subj WCP", "Subj WTR", "Subj DR"},
                        {}};
                for (const auto& s : v.at("strata")) {
                    std::vector<std::string> row{s.at("origin_rank").get<std::string>(),
                                                 std::to_string(s.at("documents").get<std::size_t>()),
                                                 f2(s.at("overall").at("mean_x100").get<double>())};
                    for (auto& c : stability_cells(s.at("overall").at("stability"))) row.push_back(std::move(c));
                    if (s.at("subjective").is_null()) {
                        row.insert(row.end(), {"-", "-", "-", "-", "-"});
                    } else {
                        row.push_back(f2(s.at("subjective").at("mean_x100").get<double>()));
                        for (auto& c : stability_cells(s.at("subjective").at("stability"))) row.push_back(std::move(c));
                    }
                    t.rows.push_back(std::move(row));
                }
                text += fmt::format("\n{}\n\n", v.at("label").get<std::string>()) + t.render();
                sj["variants"].push_back({{"label", v.at("label")}, {"strata", v.at("strata")}});
            }
            emit(reports, "stratified", text, sj, written);
        }

        const bool has_competition = std::any_of(variants.begin(), variants.end(),
                                                 [](const json& v) { return v.contains("competition"); });
        if (has_competition) {
            std::string text = "Per-query tuning: target vs non-target gains (Obj. Overall share deltas)\n";
            json cj = {{"method", method}, {"variants", json::array()}, {"reference", ref.at("competition")}};
            auto comp_rows = [](const json& c) {
                Table t{{"", "Mean Gain", "P(gain<0)", "DM"}, {}};
                for (const auto& [key, label] : {std::pair{"target", "Optimized query"},
                                                 std::pair{"non_target", "Non-target queries"},
                                                 std::pair{"spillover", "Relative spillover"}}) {
                    const auto& s = c.at(key);
                    t.rows.push_back({label, fmt::format("{:.3f}", s.at("mean").get<double>()),
                                      fmt::format("{:.3f}", s.at("p_negative").get<double>()),
                                      fmt::format("{:.3f}", s.at("dm").get<double>())});
                }
                return t.render();
            };
            for (const auto& v : variants) {
                if (!v.contains("competition")) continue;
                text += fmt::format("\n{}\n\n", v.at("label").get<std::string>()) + comp_rows(v.at("competition"));
                cj["variants"].push_back({{"label", v.at("label")}, {"competition", v.at("competition")}});
            }
            text += fmt::format("\n{}\n\n", kReferenceLabel) + comp_rows(ref.at("competition"));
            emit(reports, "competition", text, cj, written);
        }
    } catch (const json::exception& e) {
        throw MissingArtifact(std::string("malformed aggregate: ") + e.what());
    }
    return written;
}

}  // namespace ifgeo::bench
