#include "feddct/fl/cluster.hpp"

namespace feddct::fl {

ClusterRoundResult ClusterSession::fed_co_training()
{
    if (cfg_.local_epochs < 1)
        throw std::invalid_argument("local epochs must be >= 1");
    ClusterRoundResult result;
    result.key = cluster_.min_id();
    for (auto id : cluster_.members)
        result.samples += partition_.assignments[id].size();

    const int total_phases = cfg_.local_epochs * static_cast<int>(split_);
    int phase = 0;
    std::vector<std::size_t> order = rotation(0);
    for (int e = 0; e < cfg_.local_epochs; ++e) {
        const std::vector<std::size_t> next_order = e + 1 < cfg_.local_epochs ? rotation(e + 1) : order;
        for (std::size_t i = 0; i < split_; ++i, ++phase) {
            const std::size_t pos = order[i];
            begin_phase(pos, phase);
            const auto batches = epoch_batches(partition_.assignments[id(pos)], cfg_.batch_size, cfg_.seed, round_,
                                               id(pos), e);
            PhaseRecord rec{phase, id(pos), 0};
            for (std::size_t b = 0; b < batches.size(); ++b) {
                const BatchData batch = make_batch(batches[b], e, b);
                main_device_forward(batch);
                result.objective_sum += proxy_devices_update(batch);
                main_device_backprop();
                result.cot_sum += last_cot_;
                ++result.batches;
                rec.samples += batch.labels.size();
            }
            result.phases.push_back(rec);
            std::optional<std::size_t> next;
            if (phase + 1 < total_phases)
                next = i + 1 < split_ ? order[i + 1] : next_order[0];
            end_phase(next);
        }
        order = next_order;
    }

    result.model.cut = cut_;
    for (std::size_t k = 0; k < split_; ++k)
        result.model.subs.push_back(nn::Network::merge(server_lower_[k], server_upper_[k]));
    return result;
}

} // namespace feddct::fl
