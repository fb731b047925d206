#include "feddct/nn/layers.hpp"

#include <cmath>

namespace feddct::nn {

namespace {

struct KindName {
    LayerKind kind;
    const char *name;
};

constexpr KindName kKindNames[] = {
    {LayerKind::dense, "dense"},
    {LayerKind::conv2d, "conv2d"},
    {LayerKind::relu, "relu"},
    {LayerKind::softmax, "softmax"},
    {LayerKind::dropout, "dropout"},
    {LayerKind::max_pool, "max_pool"},
    {LayerKind::avg_pool, "avg_pool"},
    {LayerKind::global_avg_pool, "global_avg_pool"},
    {LayerKind::flatten, "flatten"},
};

[[noreturn]] void reject(const Layer &layer, const std::string &what)
{
    throw ShapeError("layer '" + layer.name + "' (" + to_string(layer.config.kind) + "): " + what);
}

} // namespace

std::string to_string(LayerKind kind)
{
    for (const auto &kn : kKindNames)
        if (kn.kind == kind)
            return kn.name;
    return "unknown";
}

LayerKind layer_kind_from_string(const std::string &name)
{
    for (const auto &kn : kKindNames)
        if (name == kn.name)
            return kn.kind;
    throw std::invalid_argument("unknown layer kind '" + name + "'");
}

Layer make_layer(const std::string &prefix, const std::string &name, const LayerConfig &config)
{
    Layer layer{name, config, {}};
    const std::string base = prefix.empty() ? name : prefix + "/" + name;
    switch (config.kind) {
    case LayerKind::dense:
        if (config.in == 0 || config.out == 0)
            reject(layer, "dense layer needs positive in/out features");
        layer.params.emplace_back(base + "/weight", Tensor({config.out, config.in}));
        layer.params.emplace_back(base + "/bias", Tensor({config.out}));
        break;
    case LayerKind::conv2d:
        if (config.in == 0 || config.out == 0 || config.kernel == 0 || config.groups == 0 ||
            config.in % config.groups || config.out % config.groups)
            reject(layer, "conv2d channels " + std::to_string(config.in) + "->" + std::to_string(config.out) +
                              " incompatible with groups " + std::to_string(config.groups));
        layer.params.emplace_back(base + "/weight",
                                  Tensor({config.out, config.in / config.groups, config.kernel, config.kernel}));
        layer.params.emplace_back(base + "/bias", Tensor({config.out}));
        break;
    case LayerKind::dropout:
        if (!(config.dropout_p >= 0.0 && config.dropout_p < 1.0))
            reject(layer, "dropout probability " + std::to_string(config.dropout_p) + " outside [0, 1)");
        break;
    default:
        break;
    }
    return layer;
}

void init_layer(Layer &layer, const RngStream &rng)
{
    if (layer.params.empty())
        return;
    Tensor &w = layer.params[0].value;
    const std::size_t fan_in = w.size() / w.dim(0);
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    RngStream draws = rng.child(layer.name);
    for (auto &v : w.values())
        v = stddev * draws.next_normal();
    layer.params[1].value.fill(0.0);
    for (auto &p : layer.params)
        p.momentum.fill(0.0);
}

Var forward_layer(Tape &tape, Layer &layer, Var x, const ForwardContext &ctx)
{
    const LayerConfig &c = layer.config;
    const Shape &in = x.shape();
    switch (c.kind) {
    case LayerKind::dense:
        if (in.size() != 2 || in[1] != c.in)
            reject(layer, "expected input [B, " + std::to_string(c.in) + "], got " + shape_string(in));
        return ops::dense(x, tape.parameter(layer.params[0]), tape.parameter(layer.params[1]));
    case LayerKind::conv2d:
        if (in.size() != 4 || in[1] != c.in)
            reject(layer, "expected input [B, " + std::to_string(c.in) + ", H, W], got " + shape_string(in));
        if (in[2] + 2 * c.padding < c.kernel || in[3] + 2 * c.padding < c.kernel)
            reject(layer, "kernel " + std::to_string(c.kernel) + " larger than padded input " + shape_string(in));
        return ops::conv2d(x, tape.parameter(layer.params[0]), tape.parameter(layer.params[1]),
                           ops::Conv2dOptions{c.stride, c.padding, c.groups});
    case LayerKind::relu:
        return ops::relu(x);
    case LayerKind::softmax:
        if (in.size() != 2)
            reject(layer, "expected rank-2 input, got " + shape_string(in));
        return ops::softmax_rows(x);
    case LayerKind::dropout:
        if (!ctx.training || c.dropout_p == 0.0)
            return x;
        if (!ctx.dropout_stream)
            reject(layer, "training-mode dropout needs a dropout stream");
        return ops::dropout(x, c.dropout_p, ctx.dropout_stream->child(layer.name));
    case LayerKind::max_pool:
    case LayerKind::avg_pool:
        if (in.size() != 4 || in[2] < c.kernel || in[3] < c.kernel)
            reject(layer, "pool kernel " + std::to_string(c.kernel) + " does not fit input " + shape_string(in));
        return c.kind == LayerKind::max_pool ? ops::max_pool2d(x, c.kernel, c.stride)
                                             : ops::avg_pool2d(x, c.kernel, c.stride);
    case LayerKind::global_avg_pool:
        if (in.size() != 4)
            reject(layer, "expected input [B, C, H, W], got " + shape_string(in));
        return ops::global_avg_pool(x);
    case LayerKind::flatten:
        if (in.size() < 2)
            reject(layer, "expected at least rank 2, got " + shape_string(in));
        return ops::reshape(x, Shape{in[0], shape_size(in) / in[0]});
    }
    reject(layer, "unhandled layer kind");
}

} // namespace feddct::nn
