#pragma once

#include "feddct/data/augment.hpp"
#include "feddct/division/division.hpp"
#include "feddct/nn/network.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace feddct::fl {

enum class ModelFamily { mlp, dctnet };

std::string to_string(ModelFamily f);

// Undivided model description. Sub-models are derived from it by dividing
// every hidden width with the S-way rule; input features and class count are
// never divided.
struct ModelBlueprint {
    ModelFamily family = ModelFamily::mlp;
    nn::Shape input_shape{16};
    int classes = 4;
    std::vector<std::size_t> hidden{128, 128};         // mlp
    std::array<std::size_t, 3> stages{16, 32, 64};     // dctnet conv widths
    double dropout_p = 0.0;                            // before scaling by 1/sqrt(S)
    std::optional<std::size_t> cut_layer;              // default: end of the first block
};

// MLP:    fc1, relu1, [drop1], fc2, relu2, [drop2], ..., fc_out
// DCTNet: conv1, relu1, pool1, conv2, relu2, pool2, conv3, relu3, gap, [drop], fc
// Parameter ids are "sub<k>/<layer>/weight|bias"; weights are Kaiming-normal
// draws from RngStream(seed, "init/sub<k>").
nn::Network build_network(const ModelBlueprint &bp, int split_factor, std::size_t sub_index, std::uint64_t seed);

// Layer index where the first block ends.
std::size_t default_cut(const ModelBlueprint &bp);
std::size_t resolve_cut(const ModelBlueprint &bp);

// Hidden (mlp) or stage (dctnet) widths after division.
std::vector<std::size_t> divided_widths(const ModelBlueprint &bp, int split_factor);

// Conv/dense layers of one sub-model, for the cost formulas.
division::ModelSpec model_spec(const ModelBlueprint &bp, int split_factor);

enum class Algorithm { feddct, fedavg };
enum class UpperSync { per_phase, per_round };
enum class Rotation { sequential, random };

std::string to_string(Algorithm a);
std::string to_string(UpperSync u);
std::string to_string(Rotation r);

struct TrainConfig {
    int clients = 8;        // K
    int split_factor = 4;   // S
    int local_epochs = 1;   // E
    std::size_t batch_size = 32;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 0.0;
    int warmup_rounds = 0;
    int total_rounds = 50;
    double lambda_cot = 0.5;
    std::uint64_t seed = 1;
    UpperSync upper_sync = UpperSync::per_phase;
    Rotation rotation = Rotation::sequential;
    bool shuffle_clusters = true;
    int lanes = 1;
    data::AugmentPolicy augment{false, 0.2, 0.0, 0.25};
};

// Labelled streams shared by the protocol engine, FedAvg and the test oracle
// so that all three draw identical batches, views and dropout masks.
nn::RngStream augment_stream(std::uint64_t seed, int round, std::uint32_t client, int epoch, std::size_t batch,
                             std::size_t sub);
nn::RngStream dropout_stream(std::uint64_t seed, int round, std::uint32_t client, int epoch, std::size_t batch,
                             std::size_t sub);

// Shuffles a client's shard for one epoch and cuts it into batches of at most
// batch_size samples (the last batch may be short).
std::vector<std::vector<std::size_t>> epoch_batches(std::span<const std::size_t> shard, std::size_t batch_size,
                                                    std::uint64_t seed, int round, std::uint32_t client, int epoch);

} // namespace feddct::fl
