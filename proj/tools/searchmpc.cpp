// searchmpc run <scenario> [--out DIR] [--seed S] [--no-plots] [--batch DIR] [--grid-cell SIZE]

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "searchmpc/app.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Receding-horizon coverage planner over Gaussian-mixture maps"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run a scenario file (or every scenario in --batch DIR)");
    std::string scenario;
    std::string out_dir = "out";
    std::string batch_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> grid_cell;
    bool no_plots = false;
    int runs = 1;
    run->add_option("scenario", scenario, "Scenario JSON file");
    run->add_option("--out", out_dir, "Output directory")->capture_default_str();
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_flag("--no-plots", no_plots, "Write tables only");
    run->add_option("--batch", batch_dir, "Run every *.json scenario in this directory");
    run->add_option("--grid-cell", grid_cell, "Metric grid cell size [m]");
    run->add_option("--runs", runs, "Repeat with consecutive seeds and write timing.csv")
        ->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    if (scenario.empty() == batch_dir.empty()) {
        std::cerr << "run: give exactly one of <scenario> or --batch DIR\n";
        return 64;
    }
    searchmpc::RunOptions opt;
    opt.out_dir = out_dir;
    opt.seed = seed;
    opt.grid_cell = grid_cell;
    opt.plots = !no_plots;
    opt.runs = runs;
    try {
        if (!batch_dir.empty()) return searchmpc::run_batch(batch_dir, opt).exit_code;
        const auto sc = searchmpc::load_scenario(scenario);
        return searchmpc::run_scenario(sc, std::filesystem::path(scenario).stem().string(), opt).exit_code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
