#include "feddct/nn/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace feddct::nn {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

} // namespace

RngStream::RngStream(std::uint64_t seed, std::string label)
    : seed_(seed), label_(std::move(label)), key_(mix64(seed ^ mix64(fnv1a(label_))))
{
}

RngStream RngStream::child(std::string_view sub) const
{
    std::string l = label_;
    l += '/';
    l += sub;
    return RngStream(seed_, std::move(l));
}

RngStream RngStream::child(std::string_view sub, std::uint64_t index) const
{
    std::string s(sub);
    s += std::to_string(index);
    return child(s);
}

std::uint64_t RngStream::bits_at(std::uint64_t index) const noexcept { return mix64(key_ + (index + 1) * kGamma); }

double RngStream::uniform_at(std::uint64_t index) const noexcept
{
    // 53 high bits -> [0, 1)
    return static_cast<double>(bits_at(index) >> 11) * 0x1.0p-53;
}

double RngStream::next_normal() noexcept
{
    // Box-Muller; u1 in (0, 1] avoids log(0).
    const double u1 = 1.0 - next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::next_below(std::uint64_t bound) noexcept
{
    // Rejection sampling on the top of the range keeps the draw unbiased.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    for (;;) {
        const std::uint64_t r = next_bits();
        if (r < limit)
            return r % bound;
    }
}

std::vector<std::size_t> permutation(std::size_t n, RngStream rng)
{
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    shuffle_in_place(idx, rng);
    return idx;
}

} // namespace feddct::nn
