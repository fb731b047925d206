#include "feddct/fl/ensemble.hpp"

#include "feddct/nn/ops.hpp"

#include <algorithm>
#include <numeric>

namespace feddct::fl {

EnsembleModel EnsembleModel::create(const ModelBlueprint &bp, int split_factor, std::uint64_t seed)
{
    if (split_factor < 1)
        throw std::invalid_argument("split factor must be >= 1");
    EnsembleModel m;
    for (int k = 0; k < split_factor; ++k)
        m.subs.push_back(build_network(bp, split_factor, static_cast<std::size_t>(k), seed));
    m.cut = resolve_cut(bp);
    if (m.cut < 1 || m.cut >= m.subs.front().size())
        throw std::out_of_range("cut layer " + std::to_string(m.cut) + " outside [1, " +
                                std::to_string(m.subs.front().size()) + ")");
    return m;
}

std::vector<nn::Parameter *> EnsembleModel::parameters()
{
    std::vector<nn::Parameter *> out;
    for (auto &s : subs)
        for (auto *p : s.parameters())
            out.push_back(p);
    return out;
}

std::vector<const nn::Parameter *> EnsembleModel::parameters() const
{
    std::vector<const nn::Parameter *> out;
    for (const auto &s : subs)
        for (const auto *p : s.parameters())
            out.push_back(p);
    return out;
}

std::size_t EnsembleModel::parameter_count() const
{
    std::size_t n = 0;
    for (const auto &s : subs)
        n += s.parameter_count();
    return n;
}

SplitModel split_at_cut(const nn::Network &model, std::size_t cut)
{
    auto [lower, upper] = model.split(cut);
    return {std::move(lower), std::move(upper)};
}

nn::Network merge(const SplitModel &parts) { return nn::Network::merge(parts.lower, parts.upper); }

nn::Tensor ensemble_logits(EnsembleModel &model, const nn::Tensor &x)
{
    nn::Tensor sum;
    for (auto &sub : model.subs) {
        nn::Tape tape;
        nn::Var out = sub.forward(tape, tape.constant(x), nn::ForwardContext{});
        if (sum.empty())
            sum = out.value();
        else
            sum.add_inplace(out.value());
    }
    const double inv = 1.0 / static_cast<double>(model.size());
    for (auto &v : sum.values())
        v *= inv;
    return sum;
}

nn::Tensor ensemble_predict(EnsembleModel &model, const nn::Tensor &x)
{
    nn::Tensor logits = ensemble_logits(model, x);
    const std::size_t rows = logits.dim(0), cols = logits.dim(1);
    for (std::size_t r = 0; r < rows; ++r) {
        auto p = nn::ops::softmax(logits.values().subspan(r * cols, cols));
        std::copy(p.begin(), p.end(), logits.data() + r * cols);
    }
    return logits;
}

double evaluate_accuracy(EnsembleModel &model, const data::LabeledDataset &ds, std::size_t batch_size)
{
    std::size_t correct = 0;
    std::vector<std::size_t> idx;
    for (std::size_t at = 0; at < ds.size(); at += batch_size) {
        idx.resize(std::min(batch_size, ds.size() - at));
        std::iota(idx.begin(), idx.end(), at);
        const nn::Tensor logits = ensemble_logits(model, ds.gather(idx));
        const std::size_t cols = logits.dim(1);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            const double *row = logits.data() + r * cols;
            const auto pred = static_cast<int>(std::max_element(row, row + cols) - row);
            correct += pred == ds.labels[idx[r]];
        }
    }
    return ds.size() ? static_cast<double>(correct) / static_cast<double>(ds.size()) : 0.0;
}

protocol::NodeId Cluster::min_id() const { return *std::min_element(members.begin(), members.end()); }

std::vector<Cluster> cluster_partition(std::span<const protocol::NodeId> clients, int split_factor,
                                       const nn::RngStream &rng, bool shuffle)
{
    if (split_factor < 1)
        throw ClusteringError("split factor must be >= 1");
    if (clients.empty() || clients.size() % static_cast<std::size_t>(split_factor) != 0)
        throw ClusteringError("cannot partition " + std::to_string(clients.size()) + " clients into clusters of S = " +
                              std::to_string(split_factor) + ": K must be a positive multiple of S");
    std::vector<protocol::NodeId> order(clients.begin(), clients.end());
    if (shuffle) {
        nn::RngStream r = rng;
        nn::shuffle_in_place(order, r);
    }
    std::vector<Cluster> out;
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(split_factor))
        out.push_back(Cluster{{order.begin() + static_cast<std::ptrdiff_t>(at),
                               order.begin() + static_cast<std::ptrdiff_t>(at + static_cast<std::size_t>(split_factor))}});
    return out;
}

std::vector<nn::Tensor> parameter_values(std::span<const nn::Network *const> nets)
{
    std::vector<nn::Tensor> out;
    for (const auto *n : nets)
        for (const auto *p : n->parameters())
            out.push_back(p->value);
    return out;
}

std::vector<nn::Shape> parameter_shapes(std::span<const nn::Network *const> nets)
{
    std::vector<nn::Shape> out;
    for (const auto *n : nets)
        for (const auto *p : n->parameters())
            out.push_back(p->value.shape());
    return out;
}

void load_parameter_values(std::span<nn::Network *const> nets, std::span<const nn::Tensor> values)
{
    std::size_t i = 0;
    for (auto *n : nets)
        for (auto *p : n->parameters()) {
            if (i >= values.size() || values[i].shape() != p->value.shape())
                throw nn::ShapeError("parameter payload does not match '" + p->id + "'");
            p->value = values[i++];
        }
    if (i != values.size())
        throw nn::ShapeError("parameter payload has " + std::to_string(values.size() - i) + " extra tensors");
}

} // namespace feddct::fl
