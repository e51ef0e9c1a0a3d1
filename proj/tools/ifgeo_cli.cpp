#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "ifgeo/bench/dataset.hpp"
#include "ifgeo/bench/reports.hpp"
#include "ifgeo/bench/runner.hpp"
#include "ifgeo/errors.hpp"
#include "ifgeo/llm/http_backend.hpp"
#include "ifgeo/llm/mock_backend.hpp"

namespace {

using namespace ifgeo;

struct BackendOptions {
    std::string backend = "http";
    bool mock = false;
};

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

std::unique_ptr<llm::Gateway> make_gateway(const BackendOptions& opts, std::uint64_t seed,
                                           const std::filesystem::path& out) {
    std::shared_ptr<llm::Backend> backend;
    if (opts.mock || opts.backend == "mock") {
        backend = std::make_shared<llm::MockBackend>(seed);
    } else if (opts.backend == "http") {
        backend = std::make_shared<llm::HttpBackend>(llm::http_config_from_env());
    } else {
        throw ConfigError("unknown backend '" + opts.backend + "' (expected mock or http)");
    }
    llm::GatewayOptions g;
    if (auto v = env("IFGEO_MAX_INFLIGHT")) g.max_in_flight = std::stoi(*v);
    if (auto v = env("IFGEO_TOKEN_BUDGET")) g.token_budget = std::stoll(*v);
    g.cache_dir = env("IFGEO_CACHE_DIR") ? std::filesystem::path(*env("IFGEO_CACHE_DIR")) : out / "cache";
    if (opts.mock || opts.backend == "mock") g.initial_backoff = std::chrono::milliseconds(0);
    return std::make_unique<llm::Gateway>(std::move(backend), g);
}

bench::LoadResult load(const std::string& path) {
    auto result = bench::load_dataset(path);
    for (const auto& r : result.skip_reasons) std::cerr << "skipped " << r << "\n";
    if (result.records.empty()) throw ConfigError("dataset " + path + " holds no valid records");
    return result;
}

void print_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::cout << in.rdbuf();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-query generative engine optimization workbench"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run an experiment over a dataset");
    std::string dataset, method = "ifgeo", out = "runs/latest";
    bench::ExperimentConfig cfg;
    std::vector<int> sweep;
    std::vector<std::string> ablations;
    BackendOptions backend;
    bool no_judge = false;
    run->add_option("--dataset", dataset, "JSONL dataset")->required();
    run->add_option("--method", method, "ifgeo | per_query_tune | heuristic:<name>");
    run->add_option("--n-queries", cfg.pipeline.n_queries, "Latent queries to mine");
    run->add_option("--n-suggestions", cfg.pipeline.n_suggestions, "Edit requests per query");
    run->add_option("--tau", cfg.pipeline.tau, "Global priority threshold");
    run->add_option("--sweep", sweep, "Query counts to sweep, e.g. --sweep 1 3 5");
    run->add_flag("--strata", cfg.strata, "Bucket results by initial rank");
    run->add_option("--sample", cfg.sample_size, "Queries to sample (whole clusters), 0 = all");
    run->add_option("--seed", cfg.seed, "Seed for sampling, tuning targets and the mock");
    run->add_option("--backend", backend.backend, "mock | http");
    run->add_flag("--mock", backend.mock, "Shorthand for --backend mock");
    run->add_flag("--strict-preservation", cfg.pipeline.strict_preservation,
                  "Restore sections the editor changed without being asked");
    run->add_option("--ablation", ablations, "no_blueprint | no_fusion | no_conflict_res");
    run->add_flag("--no-judge", no_judge, "Skip subjective scoring");
    run->add_option("--parallel", cfg.parallelism, "Records in flight");
    run->add_option("--out", out, "Run directory");

    // report
    auto* report = app.add_subcommand("report", "Emit reports for a finished run");
    std::string run_dir;
    report->add_option("--run-dir", run_dir, "Run directory")->required();

    // diagnose-competition
    auto* diag = app.add_subcommand("diagnose-competition", "Per-query tuning spillover diagnostic");
    std::string diag_dataset, diag_out = "runs/competition";
    std::size_t diag_sample = 0;
    std::uint64_t diag_seed = 0;
    BackendOptions diag_backend;
    diag->add_option("--dataset", diag_dataset, "JSONL dataset")->required();
    diag->add_option("--sample", diag_sample, "Queries to sample (whole clusters), 0 = all");
    diag->add_option("--seed", diag_seed, "Seed");
    diag->add_option("--backend", diag_backend.backend, "mock | http");
    diag->add_flag("--mock", diag_backend.mock, "Shorthand for --backend mock");
    diag->add_option("--out", diag_out, "Run directory");

    // validate-dataset
    auto* check = app.add_subcommand("validate-dataset", "Check a dataset file");
    std::string check_dataset;
    check->add_option("--dataset", check_dataset, "JSONL dataset")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            cfg.method = bench::Method::parse(method);
            cfg.judge = !no_judge;
            if (!sweep.empty()) cfg.sweep = sweep;
            for (const auto& a : ablations) {
                const auto parsed = ablation_from_name(a);
                if (!parsed) throw ConfigError("unknown ablation '" + a + "'");
                cfg.pipeline.ablation.insert(*parsed);
            }
            bench::validate(cfg);
            const auto data = load(dataset);
            auto gateway = make_gateway(backend, cfg.seed, out);
            const auto summary = bench::run_experiment(cfg, data.records, *gateway, out);
            for (const auto& v : summary.variants) {
                std::cerr << v.label << ": " << v.completed.size() << " records, " << v.quarantined.size()
                          << " quarantined\n";
            }
            bench::emit_reports(out);
            print_file(std::filesystem::path(out) / "reports" / "comparison.txt");
        } else if (*report) {
            for (const auto& p : bench::emit_reports(run_dir)) std::cout << p.string() << "\n";
        } else if (*diag) {
            bench::ExperimentConfig dc;
            dc.method = bench::Method::parse("per_query_tune");
            dc.sample_size = diag_sample;
            dc.seed = diag_seed;
            dc.judge = false;
            const auto data = load(diag_dataset);
            auto gateway = make_gateway(diag_backend, diag_seed, diag_out);
            bench::run_experiment(dc, data.records, *gateway, diag_out);
            bench::emit_reports(diag_out);
            print_file(std::filesystem::path(diag_out) / "reports" / "competition.txt");
        } else if (*check) {
            const auto result = bench::load_dataset(check_dataset);
            std::cout << result.records.size() << " valid records, " << result.skipped << " skipped\n";
            for (const auto& r : result.skip_reasons) std::cout << "  " << r << "\n";
            return result.skipped == 0 ? 0 : 1;
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
