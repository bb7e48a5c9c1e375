#include "dmdp/dmdp.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace {

struct Options {
    std::string config_path;
    std::string out_dir;
    int jobs = 1;
    std::optional<std::uint64_t> seed_override;
    std::vector<std::string> suites;
};

void apply_overrides(dmdp::ExperimentConfig& cfg, const Options& opt) {
    if (opt.seed_override)
        cfg.seeds = {*opt.seed_override};
    if (!opt.out_dir.empty())
        cfg.output_dir = opt.out_dir;
}

int cmd_run(const Options& opt) {
    auto cfg = dmdp::load_config(opt.config_path);
    apply_overrides(cfg, opt);
    const auto records = dmdp::run_all_seeds(cfg, opt.jobs);
    dmdp::write_outputs(cfg.output_dir, cfg, records);
    for (const auto& r : records)
        std::cout << r.run_id << ": R_K = " << r.summary.regret << " (K = " << cfg.K << ", D = " << r.summary.total_delay
                  << ")\n";
    std::cout << "wrote " << records.size() << " run(s) to " << cfg.output_dir << "\n";
    return 0;
}

// Turns a sweep label such as "/delay/value=50" into a directory name.
std::string directory_name(std::size_t index, const std::string& label) {
    std::string out = std::to_string(index) + "_";
    for (char c : label) {
        const bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                          c == '.' || c == '=';
        out += keep ? c : '_';
    }
    return out;
}

int cmd_sweep(const Options& opt) {
    auto points = dmdp::expand_sweep(dmdp::read_json_file(opt.config_path));
    std::filesystem::path root = opt.out_dir.empty() ? points.front().config.output_dir : opt.out_dir;
    for (std::size_t i = 0; i < points.size(); ++i) {
        apply_overrides(points[i].config, opt);
        points[i].config.output_dir = (root / directory_name(i, points[i].label)).string();
    }

    // Points run in parallel; seeds within a point run sequentially.
    std::vector<std::vector<dmdp::RunRecord>> results(points.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next++;
            if (i >= points.size())
                return;
            try {
                results[i] = dmdp::run_all_seeds(points[i].config, 1);
                dmdp::write_outputs(points[i].config.output_dir, points[i].config, results[i]);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    const int n = std::max(1, std::min<int>(opt.jobs, int(points.size())));
    std::vector<std::thread> threads;
    for (int t = 1; t < n; ++t)
        threads.emplace_back(worker);
    worker();
    for (auto& t : threads)
        t.join();
    if (failure)
        std::rethrow_exception(failure);

    nlohmann::json summary = nlohmann::json::array();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const double mean = dmdp::aggregate(results[i]).final_mean();
        summary.push_back({{"label", points[i].label}, {"output_dir", points[i].config.output_dir}, {"mean_R_K", mean}});
        std::cout << points[i].label << ": mean R_K = " << mean << "\n";
    }
    std::filesystem::create_directories(root);
    std::ofstream(root / "sweep_summary.json") << summary.dump(2) << '\n';
    std::cout << "wrote " << points.size() << " sweep point(s) to " << root.string() << "\n";
    return 0;
}

int cmd_check(const Options& opt) {
    const std::vector<std::string> suites = opt.suites.empty() ? std::vector<std::string>{"all"} : opt.suites;
    bool all_passed = true;
    for (const auto& name : suites) {
        const auto results = dmdp::acceptance::run_suite(name, [](const dmdp::acceptance::CriterionResult& r) {
            std::cout << dmdp::acceptance::format_result(r) << std::endl;
        });
        for (const auto& r : results)
            all_passed = all_passed && r.passed;
    }
    return all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Delayed-feedback learners for episodic adversarial MDPs"};
    app.require_subcommand(1);
    Options opt;

    auto* run = app.add_subcommand("run", "Run one experiment config over its seeds");
    run->add_option("--config", opt.config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--out", opt.out_dir, "Output directory (overrides the config)");
    run->add_option("--jobs", opt.jobs, "Parallel runs")->check(CLI::PositiveNumber);
    run->add_option("--seed-override", opt.seed_override, "Run only this seed");

    auto* sweep = app.add_subcommand("sweep", "Run every point of a parameter grid");
    sweep->add_option("--config", opt.config_path, "Sweep config (JSON with base and grid)")
        ->required()
        ->check(CLI::ExistingFile);
    sweep->add_option("--out", opt.out_dir, "Root output directory (overrides the base config)");
    sweep->add_option("--jobs", opt.jobs, "Parallel sweep points")->check(CLI::PositiveNumber);
    sweep->add_option("--seed-override", opt.seed_override, "Run only this seed at every point");

    auto* check = app.add_subcommand("check", "Run acceptance criteria and print pass/fail per criterion");
    check->add_option("suites", opt.suites, "Suite names, criterion numbers, or 'all' (default)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(opt);
        if (sweep->parsed())
            return cmd_sweep(opt);
        return cmd_check(opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
