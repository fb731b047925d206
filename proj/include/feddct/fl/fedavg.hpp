#pragma once

#include "feddct/data/partition.hpp"
#include "feddct/fl/ensemble.hpp"
#include "feddct/protocol/transport.hpp"

namespace feddct::fl {

struct LocalTrainingStats {
    double loss_sum = 0.0;
    std::size_t batches = 0;
};

// E epochs of minibatch Nesterov SGD on one shard. Batches, views and dropout
// masks come from the same labelled streams as sub-model 0 of a FedDCT main
// client, so S = 1 FedDCT retraces this exactly.
LocalTrainingStats local_sgd(nn::Network &model, std::span<const std::size_t> shard,
                             const data::LabeledDataset &train, const TrainConfig &cfg, int round,
                             protocol::NodeId client, double lr);

struct FedAvgRoundResult {
    EnsembleModel model;
    LocalTrainingStats stats;
};

// One round of federated averaging over the transport: the server sends the
// global model to every client, each trains locally, uploads, and the server
// forms the sample-weighted average. `global` must hold a single network.
FedAvgRoundResult fedavg_round(const EnsembleModel &global, std::span<const protocol::NodeId> clients,
                               const data::LabeledDataset &train, const data::Partition &partition,
                               const TrainConfig &cfg, int round, double lr, protocol::Transport &transport);

} // namespace feddct::fl
