#include "feddct/data/partition.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace feddct::data {

void Partition::validate(std::size_t n) const
{
    std::vector<char> seen(n, 0);
    std::size_t total = 0;
    for (std::size_t k = 0; k < assignments.size(); ++k) {
        if (assignments[k].empty())
            throw std::invalid_argument("client " + std::to_string(k) + " has no samples");
        for (auto i : assignments[k]) {
            if (i >= n || seen[i])
                throw std::invalid_argument("sample " + std::to_string(i) + " out of range or assigned twice");
            seen[i] = 1;
            ++total;
        }
    }
    if (total != n)
        throw std::invalid_argument("partition covers " + std::to_string(total) + " of " + std::to_string(n) +
                                    " samples");
}

Partition partition_iid(const LabeledDataset &ds, std::size_t clients, const nn::RngStream &rng)
{
    const std::size_t n = ds.size();
    if (clients < 1 || clients > n)
        throw std::invalid_argument("need 1 <= K <= n for an IID partition, got K = " + std::to_string(clients));
    const auto order = nn::permutation(n, rng);
    Partition p{std::vector<std::vector<std::size_t>>(clients), Scheme::iid, rng.seed(), rng.label()};
    std::size_t at = 0;
    for (std::size_t k = 0; k < clients; ++k) {
        const std::size_t len = n / clients + (k < n % clients ? 1 : 0);
        p.assignments[k].assign(order.begin() + static_cast<std::ptrdiff_t>(at),
                                order.begin() + static_cast<std::ptrdiff_t>(at + len));
        at += len;
    }
    return p;
}

namespace {

std::vector<std::vector<std::size_t>> draw_noniid(const LabeledDataset &ds, std::size_t clients,
                                                  nn::RngStream rng)
{
    const auto classes = static_cast<std::size_t>(ds.class_count);
    std::vector<std::vector<std::size_t>> owners(classes);
    for (std::size_t k = 0; k < clients; ++k) {
        const std::size_t m = 1 + rng.next_below(classes);
        std::vector<std::size_t> cls(classes);
        for (std::size_t c = 0; c < classes; ++c)
            cls[c] = c;
        shuffle_in_place(cls, rng);
        for (std::size_t j = 0; j < m; ++j)
            owners[cls[j]].push_back(k);
    }
    for (auto &o : owners) {
        if (o.empty())
            o.push_back(rng.next_below(clients));
        std::sort(o.begin(), o.end());
    }

    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i = 0; i < ds.size(); ++i)
        by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

    std::vector<std::vector<std::size_t>> shards(clients);
    for (std::size_t c = 0; c < classes; ++c) {
        auto &members = by_class[c];
        shuffle_in_place(members, rng);
        const auto &o = owners[c];
        std::vector<double> w(o.size());
        double total = 0.0;
        for (auto &v : w) {
            v = 1.0 - rng.next_uniform();
            total += v;
        }
        std::size_t at = 0;
        double cum = 0.0;
        for (std::size_t j = 0; j < o.size(); ++j) {
            cum += w[j];
            const std::size_t end = j + 1 == o.size()
                                        ? members.size()
                                        : static_cast<std::size_t>(std::floor(cum / total * members.size()));
            for (; at < std::min(end, members.size()); ++at)
                shards[o[j]].push_back(members[at]);
        }
    }
    for (auto &s : shards)
        std::sort(s.begin(), s.end());
    return shards;
}

} // namespace

Partition partition_noniid(const LabeledDataset &ds, std::size_t clients, const nn::RngStream &rng, int max_retries)
{
    if (clients < 1 || clients > ds.size())
        throw std::invalid_argument("need 1 <= K <= n for a non-IID partition, got K = " + std::to_string(clients));
    if (clients == 1) {
        Partition p = partition_iid(ds, 1, rng);
        p.scheme = Scheme::noniid;
        std::sort(p.assignments[0].begin(), p.assignments[0].end());
        return p;
    }
    for (int t = 0; t <= max_retries; ++t) {
        const nn::RngStream attempt = t == 0 ? rng : rng.child("retry", static_cast<std::uint64_t>(t));
        auto shards = draw_noniid(ds, clients, attempt);
        if (std::none_of(shards.begin(), shards.end(), [](const auto &s) { return s.empty(); }))
            return Partition{std::move(shards), Scheme::noniid, attempt.seed(), attempt.label()};
    }
    throw std::runtime_error("non-IID partition left a client empty after " + std::to_string(max_retries) +
                             " retries");
}

std::string partition_to_json(const Partition &p, const LabeledDataset &ds, int indent)
{
    using nlohmann::json;
    json clients = json::array();
    for (std::size_t k = 0; k < p.assignments.size(); ++k) {
        std::vector<std::size_t> hist(static_cast<std::size_t>(ds.class_count), 0);
        for (auto i : p.assignments[k])
            ++hist[static_cast<std::size_t>(ds.labels[i])];
        clients.push_back({{"client", k}, {"count", p.assignments[k].size()}, {"class_histogram", hist},
                           {"indices", p.assignments[k]}});
    }
    return json{{"scheme", p.scheme == Scheme::iid ? "iid" : "noniid"},
                {"seed", p.seed},
                {"stream", p.stream_label},
                {"samples", ds.size()},
                {"clients", clients}}
        .dump(indent);
}

} // namespace feddct::data
