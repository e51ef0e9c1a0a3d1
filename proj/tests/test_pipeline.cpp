#include <gtest/gtest.h>

#include <random>

#include "ifgeo/errors.hpp"
#include "ifgeo/pipeline.hpp"
#include "ifgeo/prompts.hpp"
#include "support.hpp"

using namespace ifgeo;
using ifgeo::testing::PatchedMock;
using ifgeo::testing::ScriptedBackend;
using nlohmann::json;

namespace {

const Document kDoc{"coag",
                    "Coagulopathy is a condition in which the blood's ability to clot is impaired.\n\n"
                    "## Causes\nCoagulopathies are sometimes mistakenly referred to as clotting disorders. "
                    "Liver disease reduces clotting factor production.\n\n"
                    "## Treatment\nTreatment depends on the underlying cause and may include plasma.\n",
                    std::nullopt};

EditRequest req(std::size_t qi, std::size_t ri, std::string excerpt, std::string suggestion, int necessity) {
    EditRequest r;
    r.query_index = qi;
    r.request_index = ri;
    r.excerpt = std::move(excerpt);
    r.suggestion = std::move(suggestion);
    r.necessity = necessity;
    r.anchor = text::locate_excerpt(kDoc.body, r.excerpt);
    return r;
}

FusedInstruction instr(std::string id, std::string excerpt, std::string suggestion, int necessity,
                       std::vector<RequestRef> prov) {
    FusedInstruction f;
    f.id = std::move(id);
    f.topic = "t";
    f.excerpt = std::move(excerpt);
    f.suggestion = std::move(suggestion);
    f.necessity = necessity;
    f.priority = necessity / 100.0;
    f.provenance = std::move(prov);
    return f;
}

struct Rig {
    std::shared_ptr<ScriptedBackend> backend = std::make_shared<ScriptedBackend>();
    llm::Gateway gateway{backend, ifgeo::testing::fast_options()};
};

}  // namespace

// ---- priority filter -----------------------------------------------------

TEST(Filter, WorkedExample) {
    // Weight 100 keeps the product equal to necessity/100.
    const QuerySet qs{"d", {{"q", 100}}};
    const std::vector<EditRequest> pool{req(0, 0, "a", "s", 80), req(0, 1, "b", "s", 65), req(0, 2, "c", "s", 90)};
    const auto kept = prioritize_and_filter(pool, qs, 0.7);
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_EQ(kept[0].request_index, 0u);
    EXPECT_EQ(kept[1].request_index, 2u);
    EXPECT_NEAR(kept[0].global_priority, 0.80, 1e-12);
}

TEST(Filter, BoundaryIsInclusive) {
    const QuerySet qs{"d", {{"q", 70}}};
    const auto kept = prioritize_and_filter({req(0, 0, "a", "s", 100)}, qs, 0.7);
    EXPECT_EQ(kept.size(), 1u);
}

TEST(Filter, ZeroThresholdKeepsEverything) {
    std::mt19937_64 rng(3);
    QuerySet qs{"d", {}};
    for (int i = 0; i < 5; ++i) qs.entries.push_back({"q" + std::to_string(i), static_cast<int>(rng() % 101)});
    std::vector<EditRequest> pool;
    for (std::size_t i = 0; i < 25; ++i) pool.push_back(req(i % 5, i / 5, "x", "s", static_cast<int>(rng() % 101)));
    EXPECT_EQ(prioritize_and_filter(pool, qs, 0.0).size(), pool.size());
}

TEST(Filter, BadQueryIndexThrows) {
    const QuerySet qs{"d", {{"q", 50}}};
    EXPECT_THROW(prioritize_and_filter({req(3, 0, "a", "s", 80)}, qs, 0.5), IndexError);
}

// Survivors shrink as tau grows, and each survivor clears tau.
TEST(Filter, MonotoneInThreshold) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        QuerySet qs{"d", {}};
        const auto nq = 1 + rng() % 5;
        for (std::size_t i = 0; i < nq; ++i) qs.entries.push_back({"q", static_cast<int>(rng() % 101)});
        std::vector<EditRequest> pool;
        for (std::size_t i = 0, n = rng() % 30; i < n; ++i) {
            pool.push_back(req(rng() % nq, i, "x", "s", static_cast<int>(rng() % 101)));
        }
        std::size_t prev = pool.size() + 1;
        for (int t = 0; t <= 20; ++t) {
            const double tau = t / 20.0;
            const auto kept = prioritize_and_filter(pool, qs, tau);
            ASSERT_LE(kept.size(), prev);
            prev = kept.size();
            for (const auto& r : kept) {
                const double oracle = (qs.entries[r.query_index].weight / 100.0) * (r.necessity / 100.0);
                ASSERT_GE(oracle, tau - 1e-12);
            }
            // Order is preserved: request indices increase.
            for (std::size_t i = 1; i < kept.size(); ++i) ASSERT_LT(kept[i - 1].request_index, kept[i].request_index);
        }
    }
}

TEST(Lift, OneInstructionPerRequest) {
    const auto lifted = lift_requests({req(1, 2, "a", "s", 70)});
    ASSERT_EQ(lifted.size(), 1u);
    EXPECT_EQ(lifted[0].id, "req_1_2");
    EXPECT_EQ(lifted[0].topic, "q1");
    EXPECT_EQ(lifted[0].provenance, (std::vector<RequestRef>{{1, 2}}));
}

// ---- dedup ---------------------------------------------------------------

TEST(Dedup, MergedNecessityIsConstituentMax) {
    Rig rig;
    rig.backend->push(Stage::dedup, R"([{"id": "m1", "topic": "misnomer",
        "excerpt": "Coagulopathies are sometimes mistakenly referred to as clotting disorders.",
        "suggestion": "Clarify the misnomer", "necessity": 85}])");
    Pipeline p(rig.gateway, {});
    const QuerySet qs{"coag", {{"q0", 90}, {"q1", 80}}};
    const std::vector<EditRequest> pool{
        req(0, 0, "Coagulopathies are sometimes mistakenly referred to as clotting disorders.", "Clarify", 80),
        req(1, 0, "Coagulopathies are sometimes mistakenly referred to as clotting disorders.", "Explain", 90)};
    const auto fused = p.deduplicate(qs, pool);
    ASSERT_EQ(fused.size(), 1u);
    EXPECT_EQ(fused[0].necessity, 90);
    EXPECT_EQ(fused[0].resolution, Resolution::merged);
    EXPECT_EQ(fused[0].provenance, (std::vector<RequestRef>{{0, 0}, {1, 0}}));
}

TEST(Dedup, SingletonSkipsTheModel) {
    Rig rig;
    Pipeline p(rig.gateway, {});
    const QuerySet qs{"coag", {{"q0", 90}}};
    const auto fused = p.deduplicate(qs, {req(0, 0, "Liver disease", "Expand", 75)});
    ASSERT_EQ(fused.size(), 1u);
    EXPECT_EQ(fused[0].resolution, Resolution::kept);
    EXPECT_TRUE(rig.backend->seen.empty());
    EXPECT_TRUE(p.deduplicate(qs, {}).empty());
}

TEST(Dedup, MockMergesSharedAnchorsWithFullProvenance) {
    auto backend = std::make_shared<llm::MockBackend>();
    llm::Gateway gw(backend, ifgeo::testing::fast_options());
    Pipeline p(gw, {});
    const QuerySet qs{"coag", {{"q0", 90}, {"q1", 80}}};
    const std::string a = "Coagulopathies are sometimes mistakenly referred to as clotting disorders.";
    const std::string b = "Treatment depends on the underlying cause and may include plasma.";
    const std::vector<EditRequest> pool{req(0, 0, a, "Add an example: \"x\"", 80), req(1, 0, a, "Add an example: \"y\"", 90),
                                        req(0, 1, b, "Add a sentence: \"z\"", 70), req(1, 1, b, "Add a sentence: \"w\"", 75)};
    const auto fused = p.deduplicate(qs, pool);
    EXPECT_LE(fused.size(), 3u);
    std::set<RequestRef> covered;
    for (const auto& f : fused) covered.insert(f.provenance.begin(), f.provenance.end());
    EXPECT_EQ(covered.size(), 4u);
}

// ---- conflict ------------------------------------------------------------

TEST(Conflict, SelectionKeepsHigherNecessity) {
    Rig rig;
    const std::string ex = "Coagulopathies are sometimes mistakenly referred to as clotting disorders.";
    // The model keeps both; the selection guard removes the loser.
    rig.backend->push(Stage::conflict, json::array({{{"id", "a"}, {"excerpt", ex}, {"suggestion", "Delete this sentence"}},
                                                    {{"id", "b"}, {"excerpt", ex}, {"suggestion", "Expand this sentence with detail"}}})
                                           .dump());
    Pipeline p(rig.gateway, {});
    const QuerySet qs{"coag", {{"q0", 90}, {"q1", 80}}};
    const auto out = p.resolve_conflicts(qs, {instr("a", ex, "Delete this sentence", 95, {{0, 0}}),
                                              instr("b", ex, "Expand this sentence with detail", 60, {{1, 0}})});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].id, "a");
    EXPECT_EQ(out[0].resolution, Resolution::selected);
}

TEST(Conflict, SynthesisAbsorbsProvenance) {
    Rig rig;
    const std::string ex = "Coagulopathies are sometimes mistakenly referred to as clotting disorders.";
    rig.backend->push(Stage::conflict, json::array({{{"id", "s1"}, {"excerpt", ex},
                                                     {"suggestion", "Condense the sentence but keep one example"}}})
                                           .dump());
    Pipeline p(rig.gateway, {});
    const QuerySet qs{"coag", {{"q0", 90}, {"q1", 80}}};
    const auto out = p.resolve_conflicts(qs, {instr("a", ex, "Delete this sentence", 70, {{0, 0}}),
                                              instr("b", ex, "Expand with an example", 65, {{1, 0}})});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out[0].resolution, Resolution::synthesized);
    EXPECT_EQ(out[0].provenance, (std::vector<RequestRef>{{0, 0}, {1, 0}}));
    EXPECT_EQ(out[0].necessity, 70);
}

TEST(Conflict, NoSharedAnchorIsIdentity) {
    Rig rig;
    Pipeline p(rig.gateway, {});
    const QuerySet qs{"coag", {{"q0", 90}}};
    const std::vector<FusedInstruction> items{instr("a", "Liver disease reduces clotting factor production.", "Delete", 90, {{0, 0}}),
                                              instr("b", "Treatment depends on the underlying cause", "Expand", 80, {{0, 1}})};
    const auto out = p.resolve_conflicts(qs, items);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].id, "a");
    EXPECT_EQ(out[1].id, "b");
    EXPECT_TRUE(rig.backend->seen.empty());
}

TEST(Conflict, CompatibleDroppedItemIsRestored) {
    Rig rig;
    const std::string ex = "Liver disease reduces clotting factor production.";
    rig.backend->push(Stage::conflict,
                      json::array({{{"id", "a"}, {"excerpt", ex}, {"suggestion", "Expand with the mechanism"}}}).dump());
    Pipeline p(rig.gateway, {});
    const QuerySet qs{"coag", {{"q0", 90}}};
    const auto out = p.resolve_conflicts(qs, {instr("a", ex, "Expand with the mechanism", 90, {{0, 0}}),
                                              instr("b", ex, "Add a statistic", 80, {{0, 1}})});
    EXPECT_EQ(out.size(), 2u);
}

// ---- blueprint -----------------------------------------------------------

TEST(Blueprint, EveryInstructionCovered) {
    Rig rig;
    rig.backend->push(Stage::blueprint, R"({"revision_blueprint": [{"section_name": "Causes",
        "target_location": "after the misnomer sentence", "modification_intent": "clarify",
        "directives": ["Apply #a: add \"Coagulopathy is not a single disease.\""], "format_note": ""}]})");
    Pipeline p(rig.gateway, {});
    const std::vector<FusedInstruction> items{
        instr("a", "Coagulopathies are sometimes mistakenly referred", "Clarify", 90, {{0, 0}}),
        instr("b", "Treatment depends on the underlying cause", "Add plasma dosing detail", 80, {{0, 1}})};
    const auto bp = p.build_blueprint(kDoc, items);
    std::set<std::string> ids;
    for (const auto& it : bp.items) ids.insert(it.instruction_ids.begin(), it.instruction_ids.end());
    EXPECT_EQ(ids, (std::set<std::string>{"a", "b"}));
    ASSERT_EQ(bp.items.size(), 2u);
    EXPECT_EQ(bp.items[0].resolved_section, 1u);
    EXPECT_EQ(bp.items[1].resolved_section, 2u);
    EXPECT_TRUE(p.build_blueprint(kDoc, {}).empty());
}

TEST(Blueprint, EmptyPlanLeavesDocumentUntouched) {
    Rig rig;
    Pipeline p(rig.gateway, {});
    const auto out = p.execute_blueprint(kDoc, {});
    EXPECT_EQ(out.body, kDoc.body);
    EXPECT_TRUE(rig.backend->seen.empty());
}

// ---- preservation --------------------------------------------------------

TEST(Preservation, DetectsChangedAndMissingSections) {
    const std::string orig = "intro\n## A\nalpha\n## B\nbeta\n";
    EXPECT_TRUE(check_preservation(orig, "intro\n## A\nalpha changed\n## B\nbeta\n\n\n", {1}).clean());
    const auto r = check_preservation(orig, "intro\n## A\nalpha\n## B\nbeta!\n", {1});
    EXPECT_EQ(r.violated, (std::vector<std::string>{"B"}));
    const auto m = check_preservation(orig, "intro\n## A\nalpha\n", {1});
    EXPECT_EQ(m.missing, (std::vector<std::string>{"B"}));
}

TEST(Preservation, RestoreBringsBackOriginalText) {
    const std::string orig = "intro\n## A\nalpha\n## B\nbeta\n## C\ngamma\n";
    const std::string revised = "intro edited\n## A\nalpha plus\n## C\ngamma\n";
    const auto fixed = restore_sections(orig, revised, {1});
    EXPECT_EQ(fixed, "intro\n## A\nalpha plus\n## B\nbeta\n## C\ngamma\n");
    EXPECT_TRUE(check_preservation(orig, fixed, {1}).clean());
}

TEST(Preservation, StrictModeRestoresAndRecords) {
    auto backend = std::make_shared<ScriptedBackend>();
    backend->push(Stage::revise, "Rewritten intro.\n\n## Causes\nNew causes text.\n\n## Treatment\nTreatment depends on the underlying cause and may include plasma.\n");
    llm::Gateway gw(backend, ifgeo::testing::fast_options());
    PipelineConfig cfg;
    cfg.strict_preservation = true;
    Pipeline p(gw, cfg);
    Blueprint bp;
    bp.items.push_back({"Causes", "end", "clarify", {"add"}, "", 1u, {"a"}});
    const auto out = p.execute_blueprint(kDoc, bp);
    EXPECT_TRUE(out.body.starts_with("Coagulopathy is a condition"));
    EXPECT_NE(out.body.find("New causes text."), std::string::npos);
    EXPECT_EQ(p.preservation_violations().size(), 1u);
}

TEST(Preservation, MissingSectionAbortsOutsideStrictMode) {
    auto backend = std::make_shared<ScriptedBackend>();
    backend->push(Stage::revise, "Coagulopathy is a condition in which the blood's ability to clot is impaired.\n\n## Causes\nx\n");
    llm::Gateway gw(backend, ifgeo::testing::fast_options());
    Pipeline p(gw, {});
    Blueprint bp;
    bp.items.push_back({"Causes", "end", "clarify", {"add"}, "", 1u, {"a"}});
    EXPECT_THROW(p.execute_blueprint(kDoc, bp), TruncationError);
}

// ---- mining --------------------------------------------------------------

TEST(Mining, ShortListTriggersOneReask) {
    Rig rig;
    rig.backend->push(Stage::mining, R"({"queries": [{"query": "a b", "probability": 80}]})");
    rig.backend->push(Stage::mining, R"({"queries": [{"query": "c d", "probability": 70}, {"query": "e f", "probability": 60}]})");
    PipelineConfig cfg;
    cfg.n_queries = 3;
    Pipeline p(rig.gateway, cfg);
    const auto qs = p.mine_queries(kDoc);
    EXPECT_EQ(qs.size(), 2u);
    EXPECT_EQ(rig.backend->seen.size(), 2u);
    EXPECT_NE(rig.backend->seen[1].user_text.find("Return exactly 3"), std::string::npos);
}

TEST(Mining, UnitScaleProbabilitiesAreRescaled) {
    Rig rig;
    rig.backend->push(Stage::mining, R"({"queries": [{"query": "a b", "probability": 0.85}, {"query": "c d", "probability": 0.4}]})");
    PipelineConfig cfg;
    cfg.n_queries = 2;
    Pipeline p(rig.gateway, cfg);
    const auto qs = p.mine_queries(kDoc);
    EXPECT_EQ(qs.entries[0].weight, 85);
    EXPECT_EQ(qs.entries[1].weight, 40);
}

TEST(Mining, ParaphrasesCollapseToHigherWeight) {
    Rig rig;
    rig.backend->push(Stage::mining, R"({"queries": [{"query": "What is coagulopathy?", "probability": 70},
        {"query": "what is coagulopathy", "probability": 90}]})");
    rig.backend->push(Stage::mining, R"({"queries": []})");
    PipelineConfig cfg;
    cfg.n_queries = 2;
    Pipeline p(rig.gateway, cfg);
    const auto qs = p.mine_queries(kDoc);
    ASSERT_EQ(qs.size(), 1u);
    EXPECT_EQ(qs.entries[0].weight, 90);
}

TEST(Mining, NothingUsableThrows) {
    Rig rig;
    rig.backend->push(Stage::mining, R"({"queries": []})");
    rig.backend->push(Stage::mining, R"({"queries": []})");
    Pipeline p(rig.gateway, {});
    EXPECT_THROW(p.mine_queries(kDoc), EmptyQuerySet);
}

// ---- end to end on the mock ---------------------------------------------

namespace {

PipelineArtifacts run_mock(PipelineConfig cfg, std::uint64_t seed = 0) {
    llm::Gateway gw(std::make_shared<llm::MockBackend>(seed), ifgeo::testing::fast_options());
    Pipeline p(gw, cfg, seed);
    return p.run(kDoc);
}

}  // namespace

TEST(Run, FullPipelineOnMock) {
    const auto art = run_mock({});
    EXPECT_EQ(art.query_set.size(), 5u);
    EXPECT_LE(art.filtered.size(), art.raw_pool.size());
    for (const auto& r : art.filtered) EXPECT_GE(r.global_priority, 0.7 - 1e-12);
    ASSERT_TRUE(art.blueprint.has_value());
    std::set<std::string> covered;
    for (const auto& it : art.blueprint->items) covered.insert(it.instruction_ids.begin(), it.instruction_ids.end());
    EXPECT_EQ(covered.size(), art.fused.size());
    EXPECT_TRUE(art.manifest.preservation_violations.empty());
    for (auto s : {Stage::mining, Stage::request_gen}) EXPECT_GT(art.manifest.tokens(s).total(), 0);
    EXPECT_EQ(art.manifest.tokens(Stage::engine).total(), 0);
    EXPECT_EQ(art.manifest.tokens(Stage::judge).total(), 0);
}

TEST(Run, Deterministic) {
    const auto a = run_mock({}, 4);
    const auto b = run_mock({}, 4);
    EXPECT_EQ(a.revised.body, b.revised.body);
    EXPECT_EQ(a.manifest.total_tokens(), b.manifest.total_tokens());
}

TEST(Run, AblationsSkipTheirStages) {
    PipelineConfig nb;
    nb.ablation = {Ablation::no_blueprint};
    nb.tau = 0.0;
    const auto a = run_mock(nb);
    EXPECT_FALSE(a.blueprint.has_value());
    EXPECT_EQ(a.manifest.tokens(Stage::blueprint).total(), 0);
    EXPECT_GT(a.manifest.tokens(Stage::revise).total(), 0);

    PipelineConfig nf;
    nf.ablation = {Ablation::no_fusion};
    nf.tau = 0.0;
    const auto b = run_mock(nf);
    EXPECT_EQ(b.manifest.tokens(Stage::dedup).total(), 0);
    EXPECT_EQ(b.manifest.tokens(Stage::conflict).total(), 0);
    EXPECT_EQ(b.manifest.tokens(Stage::blueprint).total(), 0);
    EXPECT_EQ(b.fused.size(), b.filtered.size());

    PipelineConfig nc;
    nc.ablation = {Ablation::no_conflict_res};
    nc.tau = 0.0;
    const auto c = run_mock(nc);
    EXPECT_EQ(c.manifest.tokens(Stage::conflict).total(), 0);
    EXPECT_TRUE(c.blueprint.has_value());
}

TEST(Run, HighThresholdLeavesDocumentAlone) {
    PipelineConfig cfg;
    cfg.tau = 1.0;
    const auto art = run_mock(cfg);
    EXPECT_TRUE(art.filtered.empty());
    EXPECT_EQ(art.revised.body, kDoc.body);
}

TEST(Run, FailureCarriesPartialArtifacts) {
    auto backend = std::make_shared<PatchedMock>();
    backend->patches[Stage::blueprint] = [](const llm::PromptSpec&, const std::string&) { return std::string("nope"); };
    llm::Gateway gw(backend, ifgeo::testing::fast_options());
    PipelineConfig cfg;
    cfg.tau = 0.0;
    Pipeline p(gw, cfg);
    try {
        p.run(kDoc);
        FAIL() << "expected PipelineAborted";
    } catch (const PipelineAborted& e) {
        EXPECT_EQ(e.stage(), "blueprint");
        EXPECT_EQ(e.partial().query_set.size(), 5u);
        EXPECT_FALSE(e.partial().fused.empty());
    }
}

TEST(Run, BudgetExhaustionPassesThrough) {
    auto opts = ifgeo::testing::fast_options();
    opts.token_budget = 10;
    llm::Gateway gw(std::make_shared<llm::MockBackend>(), opts);
    Pipeline p(gw, {});
    EXPECT_THROW(p.run(kDoc), BudgetExceeded);
}

// ---- per-query tuning ----------------------------------------------------

TEST(PerQuery, EditorSeesOnlyTheTargetRequests) {
    auto backend = std::make_shared<PatchedMock>();
    llm::Gateway gw(backend, ifgeo::testing::fast_options());
    Pipeline p(gw, {});
    const auto qs = p.mine_queries(kDoc);
    const auto pool = p.generate_all(kDoc, qs);
    p.per_query_tune(kDoc, qs, 2);
    const llm::PromptSpec* revise = nullptr;
    for (const auto& s : backend->seen) {
        if (s.stage == Stage::revise) revise = &s;
    }
    ASSERT_NE(revise, nullptr);
    for (const auto& r : pool) {
        const bool shown = revise->user_text.find("\"req_" + std::to_string(r.query_index) + "_") != std::string::npos;
        EXPECT_EQ(shown, r.query_index == 2) << r.query_index;
    }
    EXPECT_THROW(p.per_query_tune(kDoc, qs, 9), IndexError);
}

TEST(PerQuery, NoRequestsMeansNoRewrite) {
    auto backend = std::make_shared<PatchedMock>();
    backend->patches[Stage::request_gen] = [](const llm::PromptSpec&, const std::string&) {
        return std::string(R"({"suggestions": []})");
    };
    llm::Gateway gw(backend, ifgeo::testing::fast_options());
    Pipeline p(gw, {});
    const QuerySet qs{"coag", {{"q0", 90}, {"q1", 80}}};
    EXPECT_EQ(p.per_query_tune(kDoc, qs, 0).body, kDoc.body);
    EXPECT_EQ(p.meter().get(Stage::revise).total(), 0);
}
