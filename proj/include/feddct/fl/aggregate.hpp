#pragma once

#include "feddct/fl/ensemble.hpp"

#include <span>

namespace feddct::fl {

struct ClusterUpdate {
    const EnsembleModel *model = nullptr; // W_C, already merged from W^m and every W^p_i
    std::size_t samples = 0;              // N^(C)
    protocol::NodeId key = 0;             // smallest member id; fixes the reduction order
};

// W_en = sum_C (N^(C) / N) W_C, accumulated per scalar in ascending key order
// so the result does not depend on the order of `updates`. Momentum buffers of
// the result are zero.
EnsembleModel cluster_aggregate(std::span<const ClusterUpdate> updates);

} // namespace feddct::fl
