#pragma once

#include "feddct/data/dataset.hpp"
#include "feddct/fl/blueprint.hpp"
#include "feddct/protocol/message.hpp"

#include <stdexcept>
#include <vector>

namespace feddct::fl {

// W_en = {W_1, ..., W_S}; all sub-models share one architecture.
struct EnsembleModel {
    std::vector<nn::Network> subs;
    std::size_t cut = 1;

    // Sub-model k is built with seed stream "init/sub<k>" so members start
    // from different initializations.
    static EnsembleModel create(const ModelBlueprint &bp, int split_factor, std::uint64_t seed);

    std::size_t size() const noexcept { return subs.size(); }
    std::vector<nn::Parameter *> parameters();
    std::vector<const nn::Parameter *> parameters() const;
    std::size_t parameter_count() const;
};

struct SplitModel {
    nn::Network lower; // W^m_k, layers [0, cut)
    nn::Network upper; // W^p_k, layers [cut, end)
};

// Throws std::out_of_range unless 1 <= cut < layer count.
SplitModel split_at_cut(const nn::Network &model, std::size_t cut);
nn::Network merge(const SplitModel &parts);

// [B, C] mean of the S sub-model logits (summed in sub-model order, then
// divided by S), and its row-wise softmax.
nn::Tensor ensemble_logits(EnsembleModel &model, const nn::Tensor &x);
nn::Tensor ensemble_predict(EnsembleModel &model, const nn::Tensor &x);
double evaluate_accuracy(EnsembleModel &model, const data::LabeledDataset &ds, std::size_t batch_size = 256);

class ClusteringError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Cluster {
    std::vector<protocol::NodeId> members; // member k holds sub-model k; default rotation order
    protocol::NodeId min_id() const;
};

// K / S disjoint clusters covering every client. With shuffle the client list
// is permuted by rng first; otherwise clusters are consecutive runs.
std::vector<Cluster> cluster_partition(std::span<const protocol::NodeId> clients, int split_factor,
                                       const nn::RngStream &rng, bool shuffle = true);

// Parameter values in network order, and the inverse. Shapes must match.
std::vector<nn::Tensor> parameter_values(std::span<const nn::Network *const> nets);
std::vector<nn::Shape> parameter_shapes(std::span<const nn::Network *const> nets);
void load_parameter_values(std::span<nn::Network *const> nets, std::span<const nn::Tensor> values);

} // namespace feddct::fl
