#pragma once

#include "feddct/data/dataset.hpp"

#include <string>
#include <vector>

namespace feddct::data {

enum class Scheme { iid, noniid };

struct Partition {
    std::vector<std::vector<std::size_t>> assignments; // one index list per client
    Scheme scheme = Scheme::iid;
    std::uint64_t seed = 0;
    std::string stream_label;

    std::size_t clients() const noexcept { return assignments.size(); }
    // Throws std::invalid_argument unless the shards are nonempty, disjoint and
    // cover [0, n) exactly.
    void validate(std::size_t n) const;
};

// Shuffled shards whose sizes differ by at most one.
Partition partition_iid(const LabeledDataset &ds, std::size_t clients, const nn::RngStream &rng);

// Each client draws a class count m in [1, C] and m distinct classes; every
// class unclaimed by all clients is handed to one random client. Each class's
// samples are then split among its owners with uniform random weights. A draw
// that leaves a client empty is retried on child stream "retry<t>".
Partition partition_noniid(const LabeledDataset &ds, std::size_t clients, const nn::RngStream &rng,
                           int max_retries = 64);

std::string partition_to_json(const Partition &p, const LabeledDataset &ds, int indent = 2);

} // namespace feddct::data
