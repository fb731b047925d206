#include "feddct/cli/commands.hpp"

#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace feddct;
using namespace feddct::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name)
{
    const fs::path dir = fs::temp_directory_path() / ("feddct_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read(const fs::path &p)
{
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path write_config(const fs::path &dir, nlohmann::json j)
{
    j["output"] = {{"metrics", (dir / "m.csv").string()},
                   {"manifest", (dir / "manifest.json").string()},
                   {"checkpoint", (dir / "model.ckpt").string()},
                   {"trace", (dir / "trace.jsonl").string()}};
    const fs::path p = dir / "config.json";
    std::ofstream(p) << j.dump(2);
    return p;
}

nlohmann::json minimal()
{
    return nlohmann::json::parse(R"({
        "dataset": {"kind": "blobs", "samples": 400},
        "model": {"hidden": [64, 64]},
        "training": {"clients": 2, "split_factor": 2, "rounds": 2, "batch_size": 16}})");
}

// CSV with the trailing wall-time column removed.
std::string without_wall_time(const std::string &csv)
{
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line))
        out += line.substr(0, line.rfind(',')) + "\n";
    return out;
}

} // namespace

TEST_CASE("defaults mirror the training hyperparameters")
{
    const auto c = parse_config("{}");
    CHECK(c.algorithm == fl::Algorithm::feddct);
    CHECK(c.training.momentum == 0.9);
    CHECK(c.training.lambda_cot == 0.5);
    CHECK(c.training.local_epochs == 1);
    CHECK(parse_config(config_to_json(c).dump()).training.seed == c.training.seed);
}

TEST_CASE("invalid configs name the field")
{
    auto field_of = [](const std::string &text) {
        try {
            parse_config(text);
        } catch (const ConfigError &e) {
            return e.field;
        }
        return std::string("<accepted>");
    };
    CHECK(field_of(R"({"trainig": {}})") == "trainig");
    CHECK(field_of(R"({"training": {"lr": -1}})") == "training.lr");
    CHECK(field_of(R"({"training": {"clients": 6, "split_factor": 4}})") == "training.clients");
    CHECK(field_of(R"({"training": {"augment": {"blur": 1}}})") == "training.augment.blur");
    CHECK(field_of(R"({"algorithm": "fedprox"})") == "algorithm");
    CHECK(field_of(R"({"model": {"stages": [1, 2]}})") == "model.stages");
    CHECK(field_of(R"({"dataset": {"kind": "csv"}})") == "dataset.path");
    CHECK(field_of(R"({"training": {"momentum": 1.0}})") == "training.momentum");
    CHECK(field_of("[1, 2") == "<root>");
    CHECK(field_of(R"({"training": {"clients": 6, "split_factor": 4}, "algorithm": "fedavg"})") == "<accepted>");
}

TEST_CASE("run writes metrics, manifest and checkpoint deterministically")
{
    const auto dir = scratch("run");
    const auto cfg = write_config(dir, minimal());
    std::ostringstream out, err;
    const auto t0 = std::chrono::steady_clock::now();
    REQUIRE(run_command(cfg.string(), out, err) == exit_ok);
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(10));
    const std::string first = read(dir / "m.csv");
    std::istringstream rows(first);
    std::string line;
    int n = 0;
    while (std::getline(rows, line))
        ++n;
    CHECK(n == 3);
    CHECK(first.rfind("round,algorithm,S,K,test_accuracy", 0) == 0);
    const auto manifest = nlohmann::json::parse(read(dir / "manifest.json"));
    CHECK(manifest["seed"] == 1);
    CHECK(manifest["config"]["training"]["split_factor"] == 2);
    CHECK(fs::file_size(dir / "model.ckpt") > 0);

    REQUIRE(run_command(cfg.string(), out, err) == exit_ok);
    CHECK(without_wall_time(read(dir / "m.csv")) == without_wall_time(first));

    // The manifest reproduces the run.
    std::ofstream(dir / "again.json") << manifest["config"].dump();
    REQUIRE(run_command((dir / "again.json").string(), out, err) == exit_ok);
    CHECK(without_wall_time(read(dir / "m.csv")) == without_wall_time(first));
}

TEST_CASE("run exits with the config code on bad input")
{
    const auto dir = scratch("bad");
    auto j = minimal();
    j["training"]["clients"] = 3;
    std::ostringstream out, err;
    CHECK(run_command(write_config(dir, j).string(), out, err) == exit_config);
    CHECK(err.str().find("training.clients") != std::string::npos);
    CHECK(run_command((dir / "missing.json").string(), out, err) == exit_config);
}

TEST_CASE("divide reports stage widths and parameter ratios")
{
    std::ostringstream out, err;
    REQUIRE(divide_command(FEDDCT_CONFIG_DIR "/resnet_cifar_stages.json", 4, true, out, err) == exit_ok);
    const auto j = nlohmann::json::parse(out.str());
    CHECK(j["stage_widths"] == nlohmann::json::array({8, 16, 32}));

    std::ostringstream out2;
    REQUIRE(divide_command(FEDDCT_CONFIG_DIR "/bottleneck.json", 4, true, out2, err) == exit_ok);
    const auto b = nlohmann::json::parse(out2.str());
    CHECK(b["params_ratio"].get<double>() == 0.25);

    std::ostringstream out3;
    REQUIRE(divide_command(FEDDCT_CONFIG_DIR "/bottleneck.json", 1, false, out3, err) == exit_ok);
    CHECK(out3.str().find("\"params_ratio\": 1.0") != std::string::npos);
    CHECK(divide_command("/nonexistent.json", 2, false, out3, err) == exit_config);
}

TEST_CASE("cost report matches the formulas and a measured trace")
{
    const auto dir = scratch("cost");
    auto j = minimal();
    j["training"]["rounds"] = 1;
    const auto cfg = write_config(dir, j);
    std::ostringstream out, err;
    REQUIRE(cost_command(cfg.string(), std::nullopt, true, out, err) == exit_ok);
    const auto analytic = nlohmann::json::parse(out.str());
    const auto &c = analytic["communication"];
    CHECK(c["total_bytes"].get<double>() ==
          doctest::Approx(c["main_bytes"].get<double>() + c["proxy_bytes"].get<double>()));
    CHECK_FALSE(c.contains("trace"));

    REQUIRE(run_command(cfg.string(), out, err) == exit_ok);
    std::ostringstream traced;
    REQUIRE(cost_command(cfg.string(), (dir / "trace.jsonl").string(), true, traced, err) == exit_ok);
    const auto report = nlohmann::json::parse(traced.str());
    const auto &r = report["communication"]["trace"][0];
    CHECK(std::abs(r["relative_difference"].get<double>()) < 1e-9);
    CHECK(r["measured_bytes_with_overhead"].get<double>() > r["measured_bytes"].get<double>());

    std::ostringstream text;
    REQUIRE(cost_command(cfg.string(), std::nullopt, false, text, err) == exit_ok);
    CHECK(text.str().find("per-client communication") != std::string::npos);
}

TEST_CASE("compare joins both algorithms")
{
    const auto dir = scratch("compare");
    const auto cfg = write_config(dir, minimal());
    std::ostringstream out, err;
    REQUIRE(compare_command(cfg.string(), (dir / "joined.csv").string(), out, err) == exit_ok);
    const std::string csv = read(dir / "joined.csv");
    CHECK(csv.rfind("round,feddct_test_accuracy,fedavg_test_accuracy", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
