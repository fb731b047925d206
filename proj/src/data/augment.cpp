#include "feddct/data/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace feddct::data {

nn::Tensor augment_batch(const nn::Tensor &x, const AugmentPolicy &policy, nn::RngStream rng)
{
    if (policy.is_identity())
        return x;
    if (x.rank() < 2)
        throw nn::ShapeError("augment_batch expects a batch [B, ...], got " + nn::shape_string(x.shape()));
    nn::Tensor out = x;
    const std::size_t batch = x.dim(0), d = x.size() / batch, width = x.shape().back();
    const bool can_flip = policy.flip && x.rank() >= 3;
    for (std::size_t b = 0; b < batch; ++b) {
        double *s = out.data() + b * d;
        if (can_flip && rng.next_uniform() < 0.5)
            for (std::size_t row = 0; row < d / width; ++row)
                std::reverse(s + row * width, s + (row + 1) * width);
        if (policy.noise_std > 0.0)
            for (std::size_t i = 0; i < d; ++i)
                s[i] += policy.noise_std * rng.next_normal();
        if (policy.erase_p > 0.0 && rng.next_uniform() < policy.erase_p) {
            const auto len = std::clamp<std::size_t>(
                static_cast<std::size_t>(std::llround(policy.erase_fraction * static_cast<double>(d))), 1, d);
            const std::size_t start = rng.next_below(d - len + 1);
            std::fill(s + start, s + start + len, 0.0);
        }
    }
    return out;
}

std::vector<nn::Tensor> generate_views(const nn::Tensor &x, std::size_t views, std::span<const nn::RngStream> seeds,
                                       const AugmentPolicy &policy)
{
    if (seeds.size() != views)
        throw std::invalid_argument("generate_views: " + std::to_string(seeds.size()) + " seeds for " +
                                    std::to_string(views) + " views");
    std::vector<nn::Tensor> out;
    out.reserve(views);
    for (const auto &seed : seeds)
        out.push_back(augment_batch(x, policy, seed));
    return out;
}

} // namespace feddct::data
