#pragma once

#include "feddct/nn/rng.hpp"
#include "feddct/nn/tensor.hpp"

#include <span>
#include <vector>

namespace feddct::data {

struct AugmentPolicy {
    bool flip = false;      // mirror along the last axis with probability 1/2 (samples of rank >= 2)
    double noise_std = 0.0; // additive Gaussian noise
    double erase_p = 0.0;   // probability of zeroing one contiguous run
    double erase_fraction = 0.25;

    static AugmentPolicy identity() { return {}; }
    bool is_identity() const { return !flip && noise_std == 0.0 && erase_p == 0.0; }
};

// x is a batch [B, ...]; every sample is augmented independently, drawing from
// rng sequentially in sample order.
nn::Tensor augment_batch(const nn::Tensor &x, const AugmentPolicy &policy, nn::RngStream rng);

// One view per seed. Throws std::invalid_argument if seeds.size() != views.
std::vector<nn::Tensor> generate_views(const nn::Tensor &x, std::size_t views, std::span<const nn::RngStream> seeds,
                                       const AugmentPolicy &policy);

} // namespace feddct::data
