#include "feddct/cli/commands.hpp"

#include "feddct/costs/costs.hpp"
#include "feddct/nn/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>

namespace feddct::cli {

using nlohmann::json;

namespace {

template <class F> int guarded(std::ostream &err, F &&body)
{
    try {
        return body();
    } catch (const ConfigError &e) {
        err << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const fl::ClusteringError &e) {
        err << "clustering error: " << e.what() << "\n";
        return exit_config;
    } catch (const protocol::RoundAborted &e) {
        err << "round aborted: " << e.what() << "\n";
        return exit_aborted;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return exit_failure;
    }
}

std::ofstream open_output(const std::string &path, const char *field)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw ConfigError(field, "cannot write " + path);
    return f;
}

std::string fmt(double v, int precision = 1)
{
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << v;
    return s.str();
}

json layer_costs(const division::ModelSpec &spec)
{
    json rows = json::array();
    for (const auto &l : spec.layers)
        rows.push_back({{"name", l.name},
                        {"kind", l.type == division::LayerType::conv ? "conv" : "dense"},
                        {"kernel", l.kernel},
                        {"c_in", l.c_in},
                        {"c_out", l.c_out},
                        {"groups", l.groups},
                        {"params", costs::count_params(l)},
                        {"flops", costs::count_flops(l)}});
    return rows;
}

json ledger_json(const costs::CostLedger &c)
{
    return {{"params", c.params},
            {"flops", c.flops},
            {"mem_model", c.mem_model},
            {"mem_optimizer", c.mem_optimizer},
            {"mem_activation", c.mem_activation}};
}

// Mean over clients of model + activation bytes (and of all bytes) per round,
// read from a trace written by `run`.
std::map<int, std::pair<double, double>> trace_means(const std::string &path, int clients)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("--trace", "cannot open " + path);
    std::map<int, std::pair<double, double>> sums;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        json e;
        try {
            e = json::parse(line);
        } catch (const json::parse_error &) {
            throw ConfigError("--trace", "line " + std::to_string(lineno) + " is not JSON");
        }
        const double accounted = e.at("model_bytes").get<double>() + e.at("activation_bytes").get<double>();
        const double all = accounted + e.at("header_bytes").get<double>() + e.at("aux_bytes").get<double>();
        // A message counts for each client endpoint.
        const int ends = (e.at("sender").get<std::string>() != "server") + (e.at("receiver").get<std::string>() != "server");
        auto &s = sums[e.at("round").get<int>()];
        s.first += ends * accounted;
        s.second += ends * all;
    }
    for (auto &[_, s] : sums) {
        s.first /= clients;
        s.second /= clients;
    }
    return sums;
}

} // namespace

int run_command(const std::string &config_path, std::ostream &out, std::ostream &err)
{
    return guarded(err, [&] {
        const ExperimentConfig cfg = load_config(config_path);
        fl::Simulation sim(make_setup(cfg));

        json manifest{{"tool", "feddct"}, {"version", kVersion}, {"seed", cfg.training.seed},
                      {"config", config_to_json(cfg)}};
        open_output(cfg.output.manifest, "output.manifest") << manifest.dump(2) << "\n";

        std::ofstream csv = open_output(cfg.output.metrics, "output.metrics");
        std::ofstream trace;
        if (!cfg.output.trace.empty()) {
            trace = open_output(cfg.output.trace, "output.trace");
            sim.set_trace_sink(&trace);
        }
        csv << fl::metrics_csv_header() << "\n";
        sim.run([&](const fl::RoundMetrics &m) {
            csv << fl::metrics_csv_row(m) << "\n";
            csv.flush();
            out << "round " << m.round << "/" << cfg.training.total_rounds << "  acc " << fmt(100 * m.test_accuracy, 2)
                << "%  loss " << fmt(m.train_loss, 4) << "  bytes/client " << fmt(m.bytes_per_client, 0) << "\n";
        });
        const auto params = sim.global().parameters();
        std::vector<const nn::Parameter *> cparams(params.begin(), params.end());
        nn::save_checkpoint(cfg.output.checkpoint, cparams);
        out << "wrote " << cfg.output.metrics << ", " << cfg.output.manifest << ", " << cfg.output.checkpoint << "\n";
        return static_cast<int>(exit_ok);
    });
}

int divide_command(const std::string &spec_path, int split_factor, bool json_only, std::ostream &out,
                   std::ostream &err)
{
    return guarded(err, [&] {
        if (split_factor < 1)
            throw ConfigError("--split", "S must be >= 1");
        division::ModelSpec spec;
        try {
            spec = division::load_model_spec(spec_path);
        } catch (const std::invalid_argument &e) {
            throw ConfigError("model spec", e.what());
        }
        const auto plan = division::divide_model(spec, split_factor);
        std::uint64_t before = 0, after = 0;
        for (const auto &[o, d] : plan.per_layer) {
            before += costs::count_params(o);
            after += costs::count_params(d);
        }
        json j = json::parse(division::plan_to_json(plan));
        j["params_original"] = before;
        j["params_divided"] = after;
        j["params_ratio"] = before ? static_cast<double>(after) / static_cast<double>(before) : 0.0;
        out << j.dump(2) << "\n";
        if (!json_only)
            out << "\n"
                << division::plan_to_table(plan) << "params: " << before << " -> " << after << " per sub-model ("
                << fmt(100.0 * j["params_ratio"].get<double>(), 2) << "%)\n";
        return static_cast<int>(exit_ok);
    });
}

int cost_command(const std::string &config_path, const std::optional<std::string> &trace_path, bool json_only,
                 std::ostream &out, std::ostream &err)
{
    return guarded(err, [&] {
        const ExperimentConfig cfg = load_config(config_path);
        const fl::SimulationSetup setup = make_setup(cfg);
        const int S = cfg.algorithm == fl::Algorithm::feddct ? cfg.training.split_factor : 1;
        const auto &bp = setup.blueprint;

        const auto original = fl::model_spec(bp, 1);
        const auto divided = fl::model_spec(bp, S);
        const auto mem_o = costs::memory_estimate(original, cfg.training.batch_size);
        const auto mem_d = costs::memory_estimate(divided, cfg.training.batch_size);

        json report{{"split_factor", S},
                    {"clients", cfg.training.clients},
                    {"original", {{"layers", layer_costs(original)}, {"totals", ledger_json(mem_o)}}},
                    {"sub_model", {{"layers", layer_costs(divided)}, {"totals", ledger_json(mem_d)}}}};

        if (S >= 2) {
            const fl::EnsembleModel ens = fl::EnsembleModel::create(bp, S, cfg.training.seed);
            const auto &sub = ens.subs.front();
            const auto [lower, upper] = sub.split(ens.cut);
            const std::size_t cut_elems = nn::shape_size(sub.output_shape(bp.input_shape, 0, ens.cut));
            costs::CommParams cp;
            cp.S = S;
            cp.K = cfg.training.clients;
            cp.p = static_cast<double>(setup.train.size());
            cp.Q = static_cast<double>(S * costs::kBytesPerElement * cut_elems);
            cp.beta = static_cast<double>(lower.parameter_count()) / static_cast<double>(sub.parameter_count());
            cp.w_size = static_cast<double>(costs::kBytesPerElement * ens.parameter_count());
            json comm{{"p_samples", cp.p},
                      {"Q_bytes", cp.Q},
                      {"beta", cp.beta},
                      {"w_bytes", cp.w_size},
                      {"main_bytes", costs::comm_cost_main(cp)},
                      {"proxy_bytes", costs::comm_cost_proxy(cp)},
                      {"total_bytes", costs::comm_cost_total(cp)}};
            // Every epoch repeats the S phases, so a round moves E times the
            // single-epoch bytes in per-phase upper sync.
            const double expected = cfg.training.local_epochs * costs::comm_cost_total(cp);
            comm["expected_round_bytes"] = expected;
            if (trace_path) {
                json rounds = json::array();
                for (const auto &[r, m] : trace_means(*trace_path, cfg.training.clients))
                    rounds.push_back({{"round", r + 1},
                                      {"measured_bytes", m.first},
                                      {"measured_bytes_with_overhead", m.second},
                                      {"relative_difference", (m.first - expected) / expected}});
                comm["trace"] = rounds;
            }
            report["communication"] = comm;
        }

        if (json_only) {
            out << report.dump(2) << "\n";
            return static_cast<int>(exit_ok);
        }
        auto table = [&](const char *title, const json &section) {
            out << title << "\n";
            out << std::left << std::setw(12) << "layer" << std::setw(7) << "kind" << std::right << std::setw(4)
                << "M" << std::setw(8) << "c_in" << std::setw(8) << "c_out" << std::setw(5) << "d" << std::setw(12)
                << "params" << std::setw(14) << "flops" << "\n";
            for (const auto &l : section["layers"])
                out << std::left << std::setw(12) << l["name"].get<std::string>() << std::setw(7)
                    << l["kind"].get<std::string>() << std::right << std::setw(4) << l["kernel"] << std::setw(8)
                    << l["c_in"] << std::setw(8) << l["c_out"] << std::setw(5) << l["groups"] << std::setw(12)
                    << l["params"] << std::setw(14) << l["flops"] << "\n";
            const auto &t = section["totals"];
            out << "total params " << t["params"] << ", flops " << t["flops"] << ", mem_model " << t["mem_model"]
                << " B, mem_optimizer " << t["mem_optimizer"] << " B, mem_activation " << t["mem_activation"]
                << " B (batch " << cfg.training.batch_size << ")\n\n";
        };
        table("original model", report["original"]);
        table(("sub-model (S = " + std::to_string(S) + ")").c_str(), report["sub_model"]);
        if (report.contains("communication")) {
            const auto &c = report["communication"];
            out << "per-client communication per round (bytes)\n"
                << "  main  " << fmt(c["main_bytes"].get<double>()) << "\n"
                << "  proxy " << fmt(c["proxy_bytes"].get<double>()) << "\n"
                << "  total " << fmt(c["total_bytes"].get<double>()) << " per local epoch, "
                << fmt(c["expected_round_bytes"].get<double>()) << " per round\n";
            if (c.contains("trace")) {
                if (c["trace"].empty())
                    out << "  trace: no messages\n";
                for (const auto &r : c["trace"])
                    out << "  trace round " << r["round"] << ": measured " << fmt(r["measured_bytes"].get<double>())
                        << " (with headers and labels " << fmt(r["measured_bytes_with_overhead"].get<double>())
                        << "), relative difference " << r["relative_difference"].get<double>() << "\n";
            }
        }
        return static_cast<int>(exit_ok);
    });
}

int compare_command(const std::string &config_path, const std::string &csv_path, std::ostream &out,
                    std::ostream &err)
{
    return guarded(err, [&] {
        ExperimentConfig cfg = load_config(config_path);
        std::vector<std::vector<fl::RoundMetrics>> runs;
        for (auto algo : {fl::Algorithm::feddct, fl::Algorithm::fedavg}) {
            cfg.algorithm = algo;
            fl::Simulation sim(make_setup(cfg));
            runs.push_back(sim.run([&](const fl::RoundMetrics &m) {
                out << to_string(algo) << " round " << m.round << "  acc " << fmt(100 * m.test_accuracy, 2) << "%\n";
            }));
        }
        std::ofstream csv = open_output(csv_path, "--output");
        csv << "round,feddct_test_accuracy,fedavg_test_accuracy,feddct_train_loss,fedavg_train_loss,"
               "feddct_bytes_per_client,fedavg_bytes_per_client\n";
        for (std::size_t r = 0; r < runs[0].size(); ++r) {
            const auto &a = runs[0][r];
            const auto &b = runs[1][r];
            char buf[256];
            std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.9g,%.9g,%.1f,%.1f\n", a.round, a.test_accuracy,
                          b.test_accuracy, a.train_loss, b.train_loss, a.bytes_per_client, b.bytes_per_client);
            csv << buf;
        }
        out << "wrote " << csv_path << "\n";
        return static_cast<int>(exit_ok);
    });
}

} // namespace feddct::cli
