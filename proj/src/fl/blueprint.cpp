#include "feddct/fl/blueprint.hpp"

#include <stdexcept>

namespace feddct::fl {

namespace {

constexpr std::array<std::size_t, 3> kResnetBaseline{16, 32, 64};

void check(const ModelBlueprint &bp)
{
    if (bp.classes < 2)
        throw std::invalid_argument("model needs at least two classes");
    if (bp.family == ModelFamily::mlp) {
        if (bp.input_shape.size() != 1 || bp.input_shape[0] == 0)
            throw std::invalid_argument("mlp input_shape must be [features]");
        if (bp.hidden.empty())
            throw std::invalid_argument("mlp needs at least one hidden layer");
    } else if (bp.input_shape.size() != 3 || bp.input_shape[1] < 4 || bp.input_shape[2] < 4) {
        throw std::invalid_argument("dctnet input_shape must be [C, H, W] with H, W >= 4");
    }
    if (!(bp.dropout_p >= 0.0 && bp.dropout_p < 1.0))
        throw std::invalid_argument("dropout must be in [0, 1)");
}

double divided_dropout(const ModelBlueprint &bp, int split_factor)
{
    return division::scale_regularization({bp.dropout_p, 0.0, 0.0}, split_factor).dropout_p;
}

} // namespace

std::string to_string(ModelFamily f) { return f == ModelFamily::mlp ? "mlp" : "dctnet"; }
std::string to_string(Algorithm a) { return a == Algorithm::feddct ? "feddct" : "fedavg"; }
std::string to_string(UpperSync u) { return u == UpperSync::per_phase ? "per_phase" : "per_round"; }
std::string to_string(Rotation r) { return r == Rotation::sequential ? "sequential" : "random"; }

std::vector<std::size_t> divided_widths(const ModelBlueprint &bp, int split_factor)
{
    if (bp.family == ModelFamily::dctnet) {
        if (bp.stages == kResnetBaseline) {
            const auto w = division::resnet_stage_table(split_factor).widths;
            return {w.begin(), w.end()};
        }
        std::vector<std::size_t> out;
        for (auto c : bp.stages)
            out.push_back(division::divide_width(c, split_factor));
        return out;
    }
    std::vector<std::size_t> out;
    for (auto h : bp.hidden)
        out.push_back(division::divide_width(h, split_factor));
    return out;
}

nn::Network build_network(const ModelBlueprint &bp, int split_factor, std::size_t sub_index, std::uint64_t seed)
{
    check(bp);
    using nn::LayerConfig;
    using nn::LayerKind;
    const std::string prefix = "sub" + std::to_string(sub_index);
    const auto widths = divided_widths(bp, split_factor);
    const double p = divided_dropout(bp, split_factor);
    const auto classes = static_cast<std::size_t>(bp.classes);
    std::vector<nn::Layer> layers;
    auto add = [&](const std::string &name, LayerConfig c) { layers.push_back(nn::make_layer(prefix, name, c)); };

    if (bp.family == ModelFamily::mlp) {
        std::size_t in = bp.input_shape[0];
        for (std::size_t i = 0; i < widths.size(); ++i) {
            const std::string n = std::to_string(i + 1);
            add("fc" + n, {LayerKind::dense, in, widths[i]});
            add("relu" + n, {LayerKind::relu});
            if (p > 0.0)
                add("drop" + n, {LayerKind::dropout, 0, 0, 1, 1, 0, 1, p});
            in = widths[i];
        }
        add("fc_out", {LayerKind::dense, in, classes});
    } else {
        std::size_t in = bp.input_shape[0];
        for (std::size_t i = 0; i < 3; ++i) {
            const std::string n = std::to_string(i + 1);
            add("conv" + n, {LayerKind::conv2d, in, widths[i], 3, 1, 1, 1});
            add("relu" + n, {LayerKind::relu});
            if (i < 2)
                add("pool" + n, {LayerKind::max_pool, 0, 0, 2, 2});
            in = widths[i];
        }
        add("gap", {LayerKind::global_avg_pool});
        if (p > 0.0)
            add("drop", {LayerKind::dropout, 0, 0, 1, 1, 0, 1, p});
        add("fc_out", {LayerKind::dense, in, classes});
    }
    nn::Network net(std::move(layers));
    net.init(nn::RngStream(seed, "init/" + prefix));
    return net;
}

std::size_t default_cut(const ModelBlueprint &bp)
{
    if (bp.family == ModelFamily::dctnet)
        return 3;
    return bp.dropout_p > 0.0 ? 3 : 2;
}

std::size_t resolve_cut(const ModelBlueprint &bp) { return bp.cut_layer.value_or(default_cut(bp)); }

division::ModelSpec model_spec(const ModelBlueprint &bp, int split_factor)
{
    check(bp);
    const auto widths = divided_widths(bp, split_factor);
    division::ModelSpec spec;
    spec.name = to_string(bp.family) + "/S" + std::to_string(split_factor);
    const auto classes = static_cast<std::size_t>(bp.classes);
    using division::LayerType;
    if (bp.family == ModelFamily::mlp) {
        std::size_t in = bp.input_shape[0];
        for (std::size_t i = 0; i < widths.size(); ++i) {
            spec.layers.push_back({"fc" + std::to_string(i + 1), LayerType::dense, 1, in, widths[i], 1, 1, 1});
            in = widths[i];
        }
        spec.layers.push_back({"fc_out", LayerType::dense, 1, in, classes, 1, 1, 1});
    } else {
        std::size_t in = bp.input_shape[0], h = bp.input_shape[1], w = bp.input_shape[2];
        for (std::size_t i = 0; i < 3; ++i) {
            spec.layers.push_back({"conv" + std::to_string(i + 1), LayerType::conv, 3, in, widths[i], 1, h, w});
            in = widths[i];
            if (i < 2) {
                h /= 2;
                w /= 2;
            }
        }
        spec.layers.push_back({"fc_out", LayerType::dense, 1, in, classes, 1, 1, 1});
    }
    return spec;
}

nn::RngStream augment_stream(std::uint64_t seed, int round, std::uint32_t client, int epoch, std::size_t batch,
                             std::size_t sub)
{
    return nn::RngStream(seed, "augment")
        .child("r", static_cast<std::uint64_t>(round))
        .child("c", client)
        .child("e", static_cast<std::uint64_t>(epoch))
        .child("b", batch)
        .child("sub", sub);
}

nn::RngStream dropout_stream(std::uint64_t seed, int round, std::uint32_t client, int epoch, std::size_t batch,
                             std::size_t sub)
{
    return nn::RngStream(seed, "dropout")
        .child("r", static_cast<std::uint64_t>(round))
        .child("c", client)
        .child("e", static_cast<std::uint64_t>(epoch))
        .child("b", batch)
        .child("sub", sub);
}

std::vector<std::vector<std::size_t>> epoch_batches(std::span<const std::size_t> shard, std::size_t batch_size,
                                                    std::uint64_t seed, int round, std::uint32_t client, int epoch)
{
    if (batch_size == 0)
        throw std::invalid_argument("batch size must be positive");
    std::vector<std::size_t> order(shard.begin(), shard.end());
    nn::RngStream rng = nn::RngStream(seed, "batches")
                            .child("r", static_cast<std::uint64_t>(round))
                            .child("c", client)
                            .child("e", static_cast<std::uint64_t>(epoch));
    nn::shuffle_in_place(order, rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t at = 0; at < order.size(); at += batch_size)
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(at + batch_size, order.size())));
    return out;
}

} // namespace feddct::fl
