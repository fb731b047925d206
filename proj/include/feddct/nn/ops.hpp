#pragma once

#include "feddct/nn/autograd.hpp"
#include "feddct/nn/rng.hpp"

#include <span>
#include <vector>

// Differentiable operations recorded on a Tape. All reductions run
// sequentially in row-major order.
namespace feddct::nn::ops {

// x: [B, in], weight: [out, in], bias: [out] -> [B, out]
Var dense(Var x, Var weight, Var bias);

struct Conv2dOptions {
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t groups = 1;
};
// x: [B, Cin, H, W], weight: [Cout, Cin/groups, K, K], bias: [Cout]
Var conv2d(Var x, Var weight, Var bias, const Conv2dOptions &opt);

Var relu(Var x);
// Row-wise over the last axis of a rank-2 tensor.
Var softmax_rows(Var x);
Var log_softmax_rows(Var x);
// Inverted dropout: kept elements are scaled by 1/(1-p). Mask element i is
// drawn from rng.uniform_at(i).
Var dropout(Var x, double p, const RngStream &rng);

// x: [B, C, H, W]
Var max_pool2d(Var x, std::size_t kernel, std::size_t stride);
Var avg_pool2d(Var x, std::size_t kernel, std::size_t stride);
Var global_avg_pool(Var x); // -> [B, C]

Var reshape(Var x, Shape shape);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var x, double factor);
// Elementwise sum of equally-shaped inputs, accumulated in argument order.
Var sum_of(std::span<const Var> xs);
Var sum_all(Var x);  // -> [1]
Var mean_all(Var x); // -> [1]
Var row_sum(Var x);  // [B, C] -> [B]
// x: [B, C], picks x[b, index[b]] -> [B]
Var pick(Var x, std::span<const int> index);
// p * log(p), with 0 * log(0) = 0.
Var xlogx(Var x);

// Plain, untaped helpers.
std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

} // namespace feddct::nn::ops
