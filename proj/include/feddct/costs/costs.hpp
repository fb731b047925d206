#pragma once

#include "feddct/division/division.hpp"

#include <cstdint>

namespace feddct::costs {

// Every size in this module is 8 bytes per element (binary64).
inline constexpr std::uint64_t kBytesPerElement = 8;

struct CostLedger {
    std::uint64_t params = 0;
    std::uint64_t flops = 0;
    std::uint64_t mem_model = 0;
    std::uint64_t mem_optimizer = 0;
    std::uint64_t mem_activation = 0;
    std::uint64_t bytes_up = 0;
    std::uint64_t bytes_down = 0;

    CostLedger &operator+=(const CostLedger &o);
    friend CostLedger operator+(CostLedger a, const CostLedger &b) { return a += b; }
    bool operator==(const CostLedger &) const = default;
};

// M^2 * (c_in/d) * (c_out/d) * d, bias omitted.
std::uint64_t count_params(const division::LayerSpec &layer);
// (2 * M^2 * c_in/d - 1) * H * W * c_out.
std::uint64_t count_flops(const division::LayerSpec &layer);

// params/flops summed over layers; mem_model = mem_optimizer = 8 * params
// (one momentum buffer); mem_activation = 8 * batch * sum of c_out * H * W.
CostLedger memory_estimate(const division::ModelSpec &model, std::size_t batch);

struct CommParams {
    int S = 2;
    int K = 2;
    double p = 0.0;      // total data size, bytes
    double Q = 0.0;      // smashed-layer size, bytes
    double beta = 0.5;   // lower-portion fraction of w_size
    double w_size = 0.0; // |W|, bytes
};

// Throws std::invalid_argument unless S >= 2, K >= 1, K % S == 0, 0 < beta < 1
// and the sizes are nonnegative.
void validate(const CommParams &c);

double comm_cost_main(const CommParams &c);  // (S-1)(2p/K)(Q/S) + 2 beta w + 2(1-beta) w / S
double comm_cost_proxy(const CommParams &c); // (2p/K)(Q/S) + 2(1-beta) w / S
double comm_cost_total(const CommParams &c); // (S-1)(4p/K)(Q/S) + 2 w

} // namespace feddct::costs
