// Directional check against a real backend. Runs only with IFGEO_LIVE set,
// plus IFGEO_BASE_URL, IFGEO_MODEL and an API key; IFGEO_LIVE_DATASET
// points at a JSONL file of at least 20 records.

#include <gtest/gtest.h>

#include <cstdlib>

#include "ifgeo/bench/dataset.hpp"
#include "ifgeo/bench/reports.hpp"
#include "ifgeo/bench/runner.hpp"
#include "ifgeo/bench/serialize.hpp"
#include "ifgeo/llm/http_backend.hpp"

using namespace ifgeo;

TEST(LiveSmoke, IfgeoGainsAreDirectionallyPositive) {
    if (!std::getenv("IFGEO_LIVE")) GTEST_SKIP() << "IFGEO_LIVE not set";
    const char* path = std::getenv("IFGEO_LIVE_DATASET");
    ASSERT_NE(path, nullptr) << "IFGEO_LIVE_DATASET must name a JSONL dataset";
    const auto data = bench::load_dataset(path);
    ASSERT_GE(data.records.size(), 20u);

    llm::GatewayOptions opts;
    const auto out = std::filesystem::path(std::getenv("IFGEO_LIVE_OUT") ? std::getenv("IFGEO_LIVE_OUT") : "runs/live-smoke");
    opts.cache_dir = out / "cache";
    llm::Gateway gw(std::make_shared<llm::HttpBackend>(llm::http_config_from_env()), opts);

    bench::ExperimentConfig cfg;
    cfg.method = bench::Method::parse("ifgeo");
    cfg.sample_size = 20 * data.records.front().queries.size();
    cfg.parallelism = 4;
    const auto summary = bench::run_experiment(cfg, data.records, gw, out);
    bench::emit_reports(out);

    const auto& overall = summary.aggregate["variants"][0]["objective"]["overall"];
    EXPECT_GT(overall["mean_x100"].get<double>(), 0.0);
    EXPECT_GT(overall["stability"]["wtr"].get<double>(), 0.5);
}
