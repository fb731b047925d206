#include "feddct/fl/aggregate.hpp"

#include <algorithm>

namespace feddct::fl {

EnsembleModel cluster_aggregate(std::span<const ClusterUpdate> updates)
{
    if (updates.empty())
        throw std::invalid_argument("aggregation needs at least one cluster upload");
    std::vector<const ClusterUpdate *> order;
    std::size_t total = 0;
    for (const auto &u : updates) {
        if (!u.model)
            throw std::invalid_argument("cluster " + std::to_string(u.key) + " has no uploaded model");
        order.push_back(&u);
        total += u.samples;
    }
    if (total == 0)
        throw std::invalid_argument("aggregation over zero samples");
    std::sort(order.begin(), order.end(), [](const auto *a, const auto *b) { return a->key < b->key; });

    EnsembleModel out = *order.front()->model;
    auto dst = out.parameters();
    for (auto *p : dst) {
        p->value.fill(0.0);
        p->momentum.fill(0.0);
        p->grad.reset();
    }
    for (const auto *u : order) {
        const double w = static_cast<double>(u->samples) / static_cast<double>(total);
        const auto src = u->model->parameters();
        if (src.size() != dst.size())
            throw nn::ShapeError("cluster " + std::to_string(u->key) + " uploaded a model of a different architecture");
        for (std::size_t i = 0; i < dst.size(); ++i) {
            if (src[i]->value.shape() != dst[i]->value.shape())
                throw nn::ShapeError("cluster " + std::to_string(u->key) + ": shape mismatch for '" + dst[i]->id + "'");
            double *acc = dst[i]->value.data();
            const double *x = src[i]->value.data();
            for (std::size_t j = 0; j < dst[i]->value.size(); ++j)
                acc[j] += w * x[j];
        }
    }
    return out;
}

} // namespace feddct::fl
