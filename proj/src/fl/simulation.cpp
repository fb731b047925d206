#include "feddct/fl/simulation.hpp"

#include "feddct/fl/aggregate.hpp"
#include "feddct/nn/optim.hpp"

#include <chrono>
#include <cstdio>
#include <future>
#include <numeric>

namespace feddct::fl {

std::string metrics_csv_header()
{
    return "round,algorithm,S,K,test_accuracy,train_loss,cot_loss,bytes_per_client,wall_time_s";
}

std::string metrics_csv_row(const RoundMetrics &m)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d,%s,%d,%d,%.6f,%.9g,%.9g,%.1f,%.4f", m.round, to_string(m.algorithm).c_str(), m.S,
                  m.K, m.test_accuracy, m.train_loss, m.cot_loss, m.bytes_per_client, m.wall_time_s);
    return buf;
}

Simulation::Simulation(SimulationSetup setup) : setup_(std::move(setup))
{
    const TrainConfig &c = setup_.config;
    if (c.clients < 1)
        throw std::invalid_argument("need at least one client");
    if (setup_.partition.clients() != static_cast<std::size_t>(c.clients))
        throw std::invalid_argument("partition has " + std::to_string(setup_.partition.clients()) +
                                    " shards for K = " + std::to_string(c.clients));
    setup_.partition.validate(setup_.train.size());
    const int s = setup_.algorithm == Algorithm::feddct ? c.split_factor : 1;
    if (setup_.algorithm == Algorithm::feddct && c.clients % c.split_factor != 0)
        throw ClusteringError("cannot partition " + std::to_string(c.clients) + " clients into clusters of S = " +
                              std::to_string(c.split_factor) + ": K must be a multiple of S");
    global_ = EnsembleModel::create(setup_.blueprint, s, c.seed);
}

RoundMetrics Simulation::step()
{
    const auto t0 = std::chrono::steady_clock::now();
    const TrainConfig &cfg = setup_.config;
    const int round = round_;
    const double lr = nn::cosine_lr(round, cfg.total_rounds, cfg.lr, cfg.warmup_rounds);
    std::vector<protocol::NodeId> clients(static_cast<std::size_t>(cfg.clients));
    std::iota(clients.begin(), clients.end(), 0u);

    RoundMetrics m;
    m.round = round + 1;
    m.algorithm = setup_.algorithm;
    m.K = cfg.clients;
    m.S = static_cast<int>(global_.size());

    transports_.clear();
    results_.clear();
    clusters_.clear();
    auto fresh_transport = [&] {
        auto t = std::make_unique<protocol::Transport>();
        if (drop_)
            t->set_drop_filter(drop_);
        return t;
    };

    double loss_sum = 0.0, cot_sum = 0.0;
    std::size_t batches = 0;
    if (setup_.algorithm == Algorithm::fedavg) {
        transports_.push_back(fresh_transport());
        auto res = fedavg_round(global_, clients, setup_.train, setup_.partition, cfg, round, lr, *transports_[0]);
        global_ = std::move(res.model);
        loss_sum = res.stats.loss_sum;
        batches = res.stats.batches;
    } else {
        clusters_ = cluster_partition(clients, cfg.split_factor,
                                      nn::RngStream(cfg.seed, "clusters").child("r", static_cast<std::uint64_t>(round)),
                                      cfg.shuffle_clusters);
        for (std::size_t c = 0; c < clusters_.size(); ++c)
            transports_.push_back(fresh_transport());
        results_.resize(clusters_.size());
        auto run_cluster = [&](std::size_t c) {
            ClusterSession session(clusters_[c], global_, setup_.train, setup_.partition, cfg, round, lr,
                                   *transports_[c]);
            results_[c] = session.fed_co_training();
        };
        const auto lanes = static_cast<std::size_t>(std::max(cfg.lanes, 1));
        for (std::size_t at = 0; at < clusters_.size(); at += lanes) {
            std::vector<std::future<void>> jobs;
            for (std::size_t c = at; c < std::min(at + lanes, clusters_.size()); ++c)
                jobs.push_back(std::async(lanes > 1 ? std::launch::async : std::launch::deferred, run_cluster, c));
            for (auto &j : jobs)
                j.get();
        }
        std::vector<ClusterUpdate> updates;
        for (const auto &r : results_) {
            updates.push_back({&r.model, r.samples, r.key});
            loss_sum += r.objective_sum;
            cot_sum += r.cot_sum;
            batches += r.batches;
        }
        global_ = cluster_aggregate(updates);
    }

    std::uint64_t bytes = 0;
    for (const auto &t : transports_)
        for (auto id : clients)
            bytes += t->round_bytes(id, round).total();
    if (trace_)
        for (const auto &t : transports_)
            t->dump_trace_jsonl(*trace_);

    m.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    m.cot_loss = batches ? cot_sum / static_cast<double>(batches) : 0.0;
    m.bytes_per_client = static_cast<double>(bytes) / static_cast<double>(clients.size());
    m.test_accuracy = evaluate_accuracy(global_, setup_.test);
    ++round_;
    m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return m;
}

std::vector<RoundMetrics> Simulation::run(const std::function<void(const RoundMetrics &)> &on_round)
{
    std::vector<RoundMetrics> out;
    while (round_ < setup_.config.total_rounds) {
        out.push_back(step());
        if (on_round)
            on_round(out.back());
    }
    return out;
}

} // namespace feddct::fl
