#pragma once

#include "feddct/nn/autograd.hpp"

#include <span>

namespace feddct::nn {

class OptimizerError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Nesterov SGD in the PyTorch formulation:
//   g += weight_decay * w;  v = momentum * v + g;  w -= lr * (g + momentum * v)
// Clears every gradient afterwards. A parameter without a gradient is an error.
void sgd_nesterov_step(std::span<Parameter *const> params, double lr, double momentum, double weight_decay = 0.0);

// Linear warmup to lr0 over warmup_rounds, then half-cosine decay towards 0.
// round is clamped into [0, total_rounds).
double cosine_lr(int round, int total_rounds, double lr0, int warmup_rounds);

} // namespace feddct::nn
