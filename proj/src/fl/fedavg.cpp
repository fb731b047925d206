#include "feddct/fl/fedavg.hpp"

#include "feddct/fl/aggregate.hpp"
#include "feddct/losses/losses.hpp"
#include "feddct/nn/optim.hpp"

#include <future>

namespace feddct::fl {

using protocol::kServer;
using protocol::Message;
using protocol::MessageKind;

LocalTrainingStats local_sgd(nn::Network &model, std::span<const std::size_t> shard,
                             const data::LabeledDataset &train, const TrainConfig &cfg, int round,
                             protocol::NodeId client, double lr)
{
    LocalTrainingStats stats;
    auto params = model.parameters();
    for (int e = 0; e < cfg.local_epochs; ++e) {
        const auto batches = epoch_batches(shard, cfg.batch_size, cfg.seed, round, client, e);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const nn::Tensor x =
                data::augment_batch(train.gather(batches[b]), cfg.augment, augment_stream(cfg.seed, round, client, e, b, 0));
            const auto labels = train.gather_labels(batches[b]);
            nn::Tape tape;
            nn::ForwardContext ctx{true, dropout_stream(cfg.seed, round, client, e, b, 0)};
            nn::Var logits = model.forward(tape, tape.constant(x), ctx);
            nn::Var ce = losses::cross_entropy_batch(logits, labels);
            tape.backward(ce);
            nn::sgd_nesterov_step(params, lr, cfg.momentum, cfg.weight_decay);
            stats.loss_sum += ce.value()[0];
            ++stats.batches;
        }
    }
    return stats;
}

FedAvgRoundResult fedavg_round(const EnsembleModel &global, std::span<const protocol::NodeId> clients,
                               const data::LabeledDataset &train, const data::Partition &partition,
                               const TrainConfig &cfg, int round, double lr, protocol::Transport &transport)
{
    if (global.size() != 1)
        throw std::invalid_argument("FedAvg trains a single network, got an ensemble of " +
                                    std::to_string(global.size()));
    if (clients.empty())
        throw std::invalid_argument("FedAvg round without clients");
    transport.set_context(round, 0);
    const nn::Network *g = &global.subs.front();
    const auto shapes = parameter_shapes({&g, 1});

    std::vector<EnsembleModel> local(clients.size());
    for (std::size_t i = 0; i < clients.size(); ++i) {
        transport.set_role(clients[i], protocol::Role::client);
        transport.send(Message{MessageKind::full_model, kServer, clients[i], parameter_values({&g, 1})});
        Message msg = transport.recv(clients[i], kServer, MessageKind::full_model, shapes);
        local[i].cut = global.cut;
        local[i].subs.push_back(global.subs.front());
        local[i].subs.front().zero_momentum();
        nn::Network *dst = &local[i].subs.front();
        load_parameter_values({&dst, 1}, msg.tensors);
    }

    std::vector<LocalTrainingStats> stats(clients.size());
    auto train_one = [&](std::size_t i) {
        stats[i] = local_sgd(local[i].subs.front(), partition.assignments.at(clients[i]), train, cfg, round,
                             clients[i], lr);
    };
    const auto lanes = static_cast<std::size_t>(std::max(cfg.lanes, 1));
    for (std::size_t at = 0; at < clients.size(); at += lanes) {
        std::vector<std::future<void>> jobs;
        for (std::size_t i = at; i < std::min(at + lanes, clients.size()); ++i)
            jobs.push_back(std::async(lanes > 1 ? std::launch::async : std::launch::deferred, train_one, i));
        for (auto &j : jobs)
            j.get();
    }

    std::vector<EnsembleModel> uploaded(clients.size());
    std::vector<ClusterUpdate> updates;
    for (std::size_t i = 0; i < clients.size(); ++i) {
        const nn::Network *src = &local[i].subs.front();
        transport.send(Message{MessageKind::full_model, clients[i], kServer, parameter_values({&src, 1})});
        if (!transport.pending(kServer, clients[i]))
            throw protocol::RoundAborted(clients[i], "no model upload received in round " + std::to_string(round));
        Message msg = transport.recv(kServer, clients[i], MessageKind::full_model, shapes);
        uploaded[i] = local[i];
        nn::Network *dst = &uploaded[i].subs.front();
        load_parameter_values({&dst, 1}, msg.tensors);
        updates.push_back({&uploaded[i], partition.assignments.at(clients[i]).size(), clients[i]});
    }

    FedAvgRoundResult out{cluster_aggregate(updates), {}};
    for (const auto &s : stats) {
        out.stats.loss_sum += s.loss_sum;
        out.stats.batches += s.batches;
    }
    return out;
}

} // namespace feddct::fl
