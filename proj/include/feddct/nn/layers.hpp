#pragma once

#include "feddct/nn/autograd.hpp"
#include "feddct/nn/ops.hpp"
#include "feddct/nn/rng.hpp"

#include <optional>
#include <string>
#include <vector>

namespace feddct::nn {

enum class LayerKind { dense, conv2d, relu, softmax, dropout, max_pool, avg_pool, global_avg_pool, flatten };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string &name);

struct LayerConfig {
    LayerKind kind = LayerKind::relu;
    std::size_t in = 0;  // dense: features, conv2d: channels
    std::size_t out = 0; // dense: features, conv2d: channels
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t groups = 1;
    double dropout_p = 0.0;
};

// dense and conv2d own params = {weight, bias}; every other kind owns none.
struct Layer {
    std::string name;
    LayerConfig config;
    std::vector<Parameter> params;
};

struct ForwardContext {
    bool training = false;
    // Parent stream for dropout masks; each layer draws from child(layer name).
    std::optional<RngStream> dropout_stream;
};

// Creates a layer with zero-filled parameters named "<prefix>/<name>/weight|bias".
Layer make_layer(const std::string &prefix, const std::string &name, const LayerConfig &config);

// Kaiming-normal weights (std = sqrt(2 / fan_in)) and zero bias.
void init_layer(Layer &layer, const RngStream &rng);

// Throws ShapeError naming the layer and the offending dimensions.
Var forward_layer(Tape &tape, Layer &layer, Var x, const ForwardContext &ctx);

} // namespace feddct::nn
