#include "feddct/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace feddct::nn {

void sgd_nesterov_step(std::span<Parameter *const> params, double lr, double momentum, double weight_decay)
{
    if (!(lr > 0.0))
        throw OptimizerError("learning rate must be positive, got " + std::to_string(lr));
    if (!(momentum >= 0.0 && momentum < 1.0))
        throw OptimizerError("momentum must be in [0, 1), got " + std::to_string(momentum));
    for (const Parameter *p : params)
        if (!p->grad)
            throw OptimizerError("parameter '" + p->id + "' has no gradient");
    for (Parameter *p : params) {
        Tensor &g = *p->grad;
        for (std::size_t i = 0; i < g.size(); ++i) {
            double gi = g[i];
            if (weight_decay != 0.0)
                gi += weight_decay * p->value[i];
            const double v = momentum * p->momentum[i] + gi;
            p->momentum[i] = v;
            p->value[i] -= lr * (gi + momentum * v);
        }
        p->grad.reset();
    }
}

double cosine_lr(int round, int total_rounds, double lr0, int warmup_rounds)
{
    total_rounds = std::max(total_rounds, 1);
    warmup_rounds = std::max(warmup_rounds, 0);
    round = std::clamp(round, 0, total_rounds - 1);
    if (round < warmup_rounds)
        return lr0 * static_cast<double>(round + 1) / static_cast<double>(warmup_rounds + 1);
    const int span = std::max(total_rounds - warmup_rounds, 1);
    const double t = static_cast<double>(round - warmup_rounds) / static_cast<double>(span);
    return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

} // namespace feddct::nn
