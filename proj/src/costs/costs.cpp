#include "feddct/costs/costs.hpp"

#include <stdexcept>
#include <string>

namespace feddct::costs {

CostLedger &CostLedger::operator+=(const CostLedger &o)
{
    params += o.params;
    flops += o.flops;
    mem_model += o.mem_model;
    mem_optimizer += o.mem_optimizer;
    mem_activation += o.mem_activation;
    bytes_up += o.bytes_up;
    bytes_down += o.bytes_down;
    return *this;
}

std::uint64_t count_params(const division::LayerSpec &l)
{
    division::validate(l);
    return l.kernel * l.kernel * (l.c_in / l.groups) * (l.c_out / l.groups) * l.groups;
}

std::uint64_t count_flops(const division::LayerSpec &l)
{
    division::validate(l);
    return (2 * l.kernel * l.kernel * (l.c_in / l.groups) - 1) * l.out_h * l.out_w * l.c_out;
}

CostLedger memory_estimate(const division::ModelSpec &model, std::size_t batch)
{
    if (batch < 1)
        throw std::invalid_argument("batch must be >= 1");
    CostLedger out;
    std::uint64_t activations = 0;
    for (const auto &l : model.layers) {
        out.params += count_params(l);
        out.flops += count_flops(l);
        activations += l.c_out * l.out_h * l.out_w;
    }
    out.mem_model = kBytesPerElement * out.params;
    out.mem_optimizer = kBytesPerElement * out.params;
    out.mem_activation = kBytesPerElement * batch * activations;
    return out;
}

void validate(const CommParams &c)
{
    if (c.S < 2)
        throw std::invalid_argument("communication formulas need S >= 2, got " + std::to_string(c.S));
    if (c.K < 1 || c.K % c.S != 0)
        throw std::invalid_argument("K = " + std::to_string(c.K) + " must be a positive multiple of S = " +
                                    std::to_string(c.S));
    if (!(c.beta > 0.0 && c.beta < 1.0))
        throw std::invalid_argument("beta must be in (0, 1), got " + std::to_string(c.beta));
    if (c.p < 0.0 || c.Q < 0.0 || c.w_size < 0.0)
        throw std::invalid_argument("p, Q and |W| must be nonnegative");
}

namespace {

double smashed_term(const CommParams &c) { return (2.0 * c.p / c.K) * (c.Q / c.S); }
double upper_term(const CommParams &c) { return 2.0 * (1.0 - c.beta) * c.w_size / c.S; }

} // namespace

double comm_cost_main(const CommParams &c)
{
    validate(c);
    return (c.S - 1) * smashed_term(c) + 2.0 * c.beta * c.w_size + upper_term(c);
}

double comm_cost_proxy(const CommParams &c)
{
    validate(c);
    return smashed_term(c) + upper_term(c);
}

double comm_cost_total(const CommParams &c)
{
    validate(c);
    return (c.S - 1) * (4.0 * c.p / c.K) * (c.Q / c.S) + 2.0 * c.w_size;
}

} // namespace feddct::costs
