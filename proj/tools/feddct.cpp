#include "feddct/cli/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char **argv)
{
    using namespace feddct::cli;

    CLI::App app{"Federated divide-and-co-training simulator"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path, spec_path, trace_path, csv_path = "compare.csv";
    int split = 1;
    bool json_only = false;

    auto *run = app.add_subcommand("run", "Train per a JSON experiment config");
    run->add_option("config", config_path, "Experiment config")->required();

    auto *divide = app.add_subcommand("divide", "Divide a model spec into S sub-models");
    divide->add_option("spec", spec_path, "Model spec JSON")->required();
    divide->add_option("-S,--split", split, "Split factor S")->required();
    divide->add_flag("--json", json_only, "Print JSON only");

    auto *cost = app.add_subcommand("cost", "Analytic cost report for a config");
    cost->add_option("config", config_path, "Experiment config")->required();
    cost->add_option("--trace", trace_path, "Message trace written by run");
    cost->add_flag("--json", json_only, "Print JSON only");

    auto *compare = app.add_subcommand("compare", "Run feddct and fedavg on one seed");
    compare->add_option("config", config_path, "Experiment config")->required();
    compare->add_option("-o,--output", csv_path, "Joined CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_config;
    }

    if (*run)
        return run_command(config_path, std::cout, std::cerr);
    if (*divide)
        return divide_command(spec_path, split, json_only, std::cout, std::cerr);
    if (*cost)
        return cost_command(config_path, trace_path.empty() ? std::nullopt : std::optional(trace_path), json_only,
                            std::cout, std::cerr);
    return compare_command(config_path, csv_path, std::cout, std::cerr);
}
