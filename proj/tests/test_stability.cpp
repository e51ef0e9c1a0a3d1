#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "ifgeo/errors.hpp"
#include "ifgeo/stability.hpp"
#include "oracles.hpp"

using namespace ifgeo;
using namespace ifgeo::stability;

namespace {

GainVector gv(std::vector<double> g) { return {"d", std::move(g), std::nullopt}; }

std::vector<double> random_gains(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> g(1 + rng() % 10);
    for (auto& x : g) {
        x = u(rng);
        if (rng() % 8 == 0) x = 0.0;
    }
    return g;
}

}  // namespace

TEST(GainVector, Examples) {
    const auto g = gain_vector({0.10, 0.20}, {0.15, 0.18});
    EXPECT_NEAR(g.gains[0], 0.05, 1e-15);
    EXPECT_NEAR(g.gains[1], -0.02, 1e-15);
    EXPECT_EQ(gain_vector({0.3, 0.4}, {0.3, 0.4}).gains, (std::vector<double>{0, 0}));
    EXPECT_EQ(gain_vector({0}, {1}).gains, (std::vector<double>{1}));
    EXPECT_THROW(gain_vector({1}, {1, 2}), LengthMismatch);
    EXPECT_THROW(gain_vector({}, {}), LengthMismatch);
}

TEST(Summary, WorkedExample) {
    const auto r = stability_summary(gv({0.2, -0.1, 0.3}));
    EXPECT_NEAR(r.mean, 0.4 / 3, 1e-12);
    EXPECT_NEAR(r.wcp, -0.1, 1e-15);
    EXPECT_NEAR(r.wtr, 2.0 / 3, 1e-15);
    EXPECT_NEAR(r.dr, 0.01 / 3, 1e-15);
    EXPECT_EQ(r.count, 3u);
    EXPECT_TRUE(r.per_document);
}

TEST(Summary, AllZero) {
    const auto r = stability_summary(gv({0, 0, 0, 0}));
    EXPECT_EQ(r.mean, 0.0);
    EXPECT_EQ(r.variance, 0.0);
    EXPECT_EQ(r.wcp, 0.0);
    EXPECT_EQ(r.wtr, 1.0);
    EXPECT_EQ(r.dr, 0.0);
}

TEST(Summary, SampleVarianceSwitch) {
    const auto g = gv({1, 2, 3, 4});
    EXPECT_NEAR(stability_summary(g).variance, 1.25, 1e-15);
    EXPECT_NEAR(stability_summary(g, VarianceKind::sample).variance, 5.0 / 3, 1e-15);
    EXPECT_EQ(stability_summary(gv({7}), VarianceKind::sample).variance, 0.0);
}

TEST(Summary, MatchesOracle) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto g = random_gains(rng);
        const auto r = stability_summary(gv(g));
        const auto o = ifgeo::testing::stats_oracle(g);
        ASSERT_NEAR(r.mean, o.mean, 1e-12);
        ASSERT_NEAR(r.variance, o.variance, 1e-12);
        ASSERT_NEAR(r.wcp, o.wcp, 1e-12);
        ASSERT_NEAR(r.wtr, o.wtr, 1e-12);
        ASSERT_NEAR(r.dr, o.dr, 1e-12);
    }
}

TEST(Summary, Invariants) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 5000; ++trial) {
        auto g = random_gains(rng);
        if (trial % 3 == 0) {
            for (auto& x : g) x = std::abs(x);
        }
        const auto r = stability_summary(gv(g));
        const bool a = r.wcp >= 0.0, b = r.wtr == 1.0, c = r.dr == 0.0;
        ASSERT_EQ(a, b);
        ASSERT_EQ(b, c);
        ASSERT_GE(r.wtr, 0.0);
        ASSERT_LE(r.wtr, 1.0);
        ASSERT_GE(r.dr, 0.0);
        ASSERT_LE(r.wcp, r.mean + 1e-15);
        const double low = std::min(0.0, r.wcp);
        ASSERT_LE(r.dr, low * low + 1e-15);
        ASSERT_GE(r.dr, low * low / g.size() - 1e-15);

        const double scale = 0.1 + (rng() % 100) / 10.0;
        auto scaled = g;
        for (auto& x : scaled) x *= scale;
        const auto s = stability_summary(gv(scaled));
        ASSERT_NEAR(s.mean, scale * r.mean, 1e-9);
        ASSERT_NEAR(s.wcp, scale * r.wcp, 1e-9);
        ASSERT_NEAR(s.variance, scale * scale * r.variance, 1e-9);
        ASSERT_NEAR(s.dr, scale * scale * r.dr, 1e-9);
        ASSERT_EQ(s.wtr, r.wtr);

        auto shuffled = g;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const auto p = stability_summary(gv(shuffled));
        ASSERT_NEAR(p.mean, r.mean, 1e-12);
        ASSERT_NEAR(p.variance, r.variance, 1e-12);
        ASSERT_EQ(p.wcp, r.wcp);
        ASSERT_EQ(p.wtr, r.wtr);
        ASSERT_NEAR(p.dr, r.dr, 1e-12);
    }
}

TEST(Average, FieldwiseMeanOfDocumentReports) {
    const auto a = stability_summary(gv({0.2, -0.1}));
    const auto b = stability_summary(gv({0.0, 0.4}));
    const auto avg = average_reports({a, b});
    EXPECT_FALSE(avg.per_document);
    EXPECT_EQ(avg.count, 2u);
    EXPECT_NEAR(avg.wcp, (-0.1 + 0.0) / 2, 1e-15);
    EXPECT_NEAR(avg.wtr, (0.5 + 1.0) / 2, 1e-15);
    EXPECT_NEAR(avg.mean, (0.05 + 0.2) / 2, 1e-15);
    const auto empty = average_reports({});
    EXPECT_EQ(empty.count, 0u);
    EXPECT_EQ(empty.mean, 0.0);
}

TEST(Aggregate, DispatchAndHooks) {
    const auto g = gv({1, 2, 3});
    EXPECT_DOUBLE_EQ(aggregate(g, {AggregationKind::mean, {}}), 2.0);
    EXPECT_DOUBLE_EQ(aggregate(g, {AggregationKind::wcp, {}}), 1.0);
    const auto median = [](const std::vector<double>& v) {
        auto s = v;
        std::sort(s.begin(), s.end());
        return s[s.size() / 2];
    };
    EXPECT_DOUBLE_EQ(aggregate(gv({1, 9, 2}), {AggregationKind::custom, median}), 2.0);
    EXPECT_THROW(aggregate(g, {AggregationKind::custom, {}}), UnknownKind);
    EXPECT_THROW(aggregation_from_name("median"), UnknownKind);
    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) {
        const auto v = gv(random_gains(rng));
        const auto r = stability_summary(v);
        ASSERT_EQ(aggregate(v, {aggregation_from_name("mean"), {}}), r.mean);
        ASSERT_EQ(aggregate(v, {aggregation_from_name("variance"), {}}), r.variance);
        ASSERT_EQ(aggregate(v, {aggregation_from_name("wcp"), {}}), r.wcp);
        ASSERT_EQ(aggregate(v, {aggregation_from_name("wtr"), {}}), r.wtr);
        ASSERT_EQ(aggregate(v, {aggregation_from_name("dr"), {}}), r.dr);
    }
}

TEST(Competition, ConstantVectorExample) {
    const auto rep = competition_stats({gv({0.277, 0.087, 0.087, 0.087, 0.087})}, {0});
    EXPECT_NEAR(rep.target.mean, 0.277, 1e-12);
    EXPECT_NEAR(rep.non_target.mean, 0.087, 1e-12);
    EXPECT_NEAR(rep.spillover.mean, -0.19, 1e-12);
    EXPECT_EQ(rep.spillover.p_negative, 1.0);
    EXPECT_NEAR(rep.spillover.dm, 0.19, 1e-12);
    EXPECT_EQ(rep.spillover.count, 4u);
}

TEST(Competition, EqualGainsHaveNoSpillover) {
    const auto rep = competition_stats({gv({0.1, 0.1, 0.1})}, {2});
    EXPECT_EQ(rep.spillover.mean, 0.0);
    EXPECT_EQ(rep.spillover.dm, 0.0);
    EXPECT_EQ(rep.spillover.p_negative, 0.0);
}

TEST(Competition, Errors) {
    EXPECT_THROW(competition_stats({gv({0.1})}, {1}), IndexError);
    EXPECT_THROW(competition_stats({gv({0.1})}, {}), IndexError);
}

TEST(Competition, MatchesOracle) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<GainVector> all;
        std::vector<std::size_t> targets;
        std::vector<double> t, nt, sp;
        for (int d = 0, n = 1 + static_cast<int>(rng() % 4); d < n; ++d) {
            auto g = random_gains(rng);
            const std::size_t tgt = rng() % g.size();
            for (std::size_t j = 0; j < g.size(); ++j) {
                if (j == tgt) {
                    t.push_back(g[j]);
                } else {
                    nt.push_back(g[j]);
                    sp.push_back(g[j] - g[tgt]);
                }
            }
            all.push_back(gv(g));
            targets.push_back(tgt);
        }
        const auto rep = competition_stats(all, targets);
        const std::pair<const PopulationStats*, std::vector<double>*> pops[] = {
            {&rep.target, &t}, {&rep.non_target, &nt}, {&rep.spillover, &sp}};
        for (const auto& [got, values] : pops) {
            const auto o = ifgeo::testing::population_oracle(*values);
            ASSERT_NEAR(got->mean, o.mean, 1e-12);
            ASSERT_NEAR(got->p_negative, o.p_negative, 1e-12);
            ASSERT_NEAR(got->dm, o.dm, 1e-12);
            ASSERT_GE(got->dm, 0.0);
        }
    }
}
