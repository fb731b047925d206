#pragma once

#include "feddct/fl/cluster.hpp"
#include "feddct/fl/fedavg.hpp"

#include <functional>
#include <memory>
#include <ostream>

namespace feddct::fl {

struct RoundMetrics {
    int round = 0;
    Algorithm algorithm = Algorithm::feddct;
    int S = 1;
    int K = 1;
    double test_accuracy = 0.0;
    double train_loss = 0.0;       // mean per-batch objective (FedDCT) or cross-entropy (FedAvg)
    double cot_loss = 0.0;         // mean per-batch L_cot; 0 for FedAvg and S = 1
    double bytes_per_client = 0.0; // measured, headers and aux traffic included
    double wall_time_s = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const RoundMetrics &m);

struct SimulationSetup {
    Algorithm algorithm = Algorithm::feddct;
    ModelBlueprint blueprint;
    TrainConfig config;
    data::LabeledDataset train;
    data::LabeledDataset test;
    data::Partition partition;
};

/// Round driver. A round begins with cluster formation and ends with server
/// aggregation; metrics are reported at that boundary. Clusters run in up to
/// `lanes` parallel lanes, each with its own transport, and are aggregated in
/// canonical order, so the trajectory does not depend on the lane count.
class Simulation {
public:
    explicit Simulation(SimulationSetup setup);

    RoundMetrics step();
    std::vector<RoundMetrics> run(const std::function<void(const RoundMetrics &)> &on_round = {});

    int rounds_done() const noexcept { return round_; }
    EnsembleModel &global() noexcept { return global_; }
    const SimulationSetup &setup() const noexcept { return setup_; }

    // Transports of the most recent round, in cluster order.
    const std::vector<std::unique_ptr<protocol::Transport>> &last_transports() const noexcept { return transports_; }
    const std::vector<Cluster> &last_clusters() const noexcept { return clusters_; }
    const std::vector<ClusterRoundResult> &last_results() const noexcept { return results_; }

    void set_drop_filter(protocol::Transport::DropFilter f) { drop_ = std::move(f); }
    void set_trace_sink(std::ostream *out) { trace_ = out; }

private:
    SimulationSetup setup_;
    EnsembleModel global_;
    int round_ = 0;
    std::vector<std::unique_ptr<protocol::Transport>> transports_;
    std::vector<Cluster> clusters_;
    std::vector<ClusterRoundResult> results_;
    protocol::Transport::DropFilter drop_;
    std::ostream *trace_ = nullptr;
};

} // namespace feddct::fl
