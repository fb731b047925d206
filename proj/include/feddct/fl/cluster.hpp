#pragma once

#include "feddct/data/partition.hpp"
#include "feddct/fl/ensemble.hpp"
#include "feddct/protocol/transport.hpp"

#include <memory>
#include <optional>

namespace feddct::fl {

struct BatchData {
    nn::Tensor x;
    std::vector<int> labels;
    int epoch = 0;
    std::size_t index = 0; // batch index within the epoch
};

struct PhaseRecord {
    int phase = 0;
    protocol::NodeId main = 0;
    std::size_t samples = 0; // samples the main pushed through the lower ensemble
};

struct ClusterRoundResult {
    EnsembleModel model;     // W_C after the round
    std::size_t samples = 0; // N^(C)
    protocol::NodeId key = 0;
    double objective_sum = 0.0; // sum over batches of the cluster objective
    double cot_sum = 0.0;       // sum over batches of L_cot (unweighted)
    std::size_t batches = 0;
    std::vector<PhaseRecord> phases;
};

/// One cluster executing a round of federated co-training over a Transport.
///
/// Every actor keeps its own copy of the weights it holds and only learns new
/// values by decoding messages: the main client holds all S lower portions,
/// member k holds upper portion k, and the server holds the latest uploads.
///
/// Per batch: main_device_forward -> proxy_devices_update -> main_device_backprop.
/// Upper momentum lives on its device for the whole round. Lower momentum is
/// reset whenever W^m arrives on a device, since only weights are transferred.
class ClusterSession {
public:
    ClusterSession(Cluster cluster, const EnsembleModel &global, const data::LabeledDataset &train,
                   const data::Partition &partition, const TrainConfig &cfg, int round, double lr,
                   protocol::Transport &transport);
    ~ClusterSession();

    // Whole round (E epochs, every member main once per epoch); uploads W_C.
    ClusterRoundResult fed_co_training();

    // Rotation order (member positions) for one epoch.
    std::vector<std::size_t> rotation(int epoch) const;

    // Phase plumbing, exposed for step-level tests. begin_phase delivers W^m
    // to the main and W^p_k to member k as the upper-sync mode requires.
    void begin_phase(std::size_t main_pos, int phase);
    // next_main_pos == nullopt ends the round.
    void end_phase(std::optional<std::size_t> next_main_pos);

    BatchData make_batch(std::span<const std::size_t> indices, int epoch, std::size_t index) const;

    // Returns the S smashed tensors and sends S - 1 of them.
    std::vector<nn::Tensor> main_device_forward(const BatchData &batch);
    // Members predict, the server evaluates the objective, members backprop
    // and step W^p_k, proxies send cut gradients. Returns the objective value.
    double proxy_devices_update(const BatchData &batch);
    void main_device_backprop();

    const Cluster &cluster() const noexcept { return cluster_; }
    std::size_t main_position() const noexcept { return main_pos_; }
    // Current weights as held by the devices (lower portions from the main).
    EnsembleModel device_view() const;
    double last_cot() const noexcept { return last_cot_; }

private:
    struct Device;

    protocol::NodeId id(std::size_t pos) const { return cluster_.members[pos]; }
    void set_roles();
    void server_send_upper(std::size_t pos);
    void member_recv_upper(std::size_t pos);
    void member_upload_upper(std::size_t pos);

    Cluster cluster_;
    const data::LabeledDataset &train_;
    const data::Partition &partition_;
    TrainConfig cfg_;
    int round_;
    double lr_;
    protocol::Transport &net_;
    std::size_t split_;
    std::size_t cut_;
    nn::Shape cut_shape_;
    std::size_t classes_;

    std::vector<nn::Network> server_lower_;
    std::vector<nn::Network> server_upper_;
    std::vector<std::unique_ptr<Device>> devices_;

    std::size_t main_pos_ = 0;
    int phase_ = 0;
    std::unique_ptr<nn::Tape> main_tape_;
    std::vector<nn::Var> lower_out_;
    nn::Tensor local_cut_;
    double last_cot_ = 0.0;
};

} // namespace feddct::fl
